//! Argument parsing and dispatch.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use lvfeeder::synthgen::ScenarioConfig;

use crate::bounds::{run_bounds, BoundsConfig, BoundsMethod};
use crate::buddy::{run_buddy, BuddyConfig, BuddyMethod};
use crate::error::{CliError, Result};
use crate::evaluate::{run_evaluate, EvaluateConfig};
use crate::generate::run_generate;
use crate::load_config;
use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "lvfeeder", version, about = "Buddying and confidence bounds for low-voltage feeders")]
pub struct Cli {
    /// Worker threads; all cores by default. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset with ground truth.
    Generate {
        /// Scenario JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Master seed, overriding the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Buddy every feeder of a dataset.
    Buddy {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value = "ga")]
        method: BuddyMethod,
        /// Comma-separated weights, overriding the config.
        #[arg(long, value_delimiter = ',')]
        w: Option<Vec<f64>>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build and score confidence bands for every feeder of a dataset.
    Bounds {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        method: BoundsMethod,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit error-versus-demand power laws and histogram alphas from earlier runs.
    Evaluate {
        /// Output directories of `buddy` or `bounds` runs.
        #[arg(long, required = true, num_args = 1..)]
        results: Vec<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(command: Command) -> Result<RunManifest> {
    match command {
        Command::Generate { config, seed, out } => {
            let mut cfg: ScenarioConfig = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            run_generate(&cfg, &out)
        }
        Command::Buddy {
            data,
            method,
            w,
            config,
            seed,
            out,
        } => {
            let mut cfg: BuddyConfig = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if w.is_some() {
                cfg.w = w;
            }
            Ok(run_buddy(&data, &cfg, method, &out)?.manifest)
        }
        Command::Bounds {
            data,
            method,
            config,
            seed,
            out,
        } => {
            let mut cfg: BoundsConfig = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            Ok(run_bounds(&data, &cfg, method, &out)?.manifest)
        }
        Command::Evaluate { results, config, out } => {
            let cfg: EvaluateConfig = load_config(config.as_deref())?;
            Ok(run_evaluate(&results, &cfg, &out)?.manifest)
        }
    }
}

/// Runs a parsed command on a thread pool of the requested size.
pub fn run(cli: Cli) -> Result<RunManifest> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    match cli.jobs {
        Some(0) => return Err(CliError::Config("--jobs must be at least 1".into())),
        Some(n) => builder = builder.num_threads(n),
        None => {}
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {} worker threads: {e}", cli.jobs.unwrap_or(0))))?;
    pool.install(|| dispatch(cli.command))
}

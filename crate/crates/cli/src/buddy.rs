//! The buddying pipeline: one assignment per feeder and weight, scored by
//! RMAE against the substation series over the training and test windows.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use lvfeeder::buddying::{cost, ga_buddy, simple_buddy, CostBreakdown, GaConfig};
use lvfeeder::evaluation::{non_domestic_proportion, rmae, ProportionBucket};
use lvfeeder::ingestion::files::{write_atomic, write_json};
use lvfeeder::ingestion::Dataset;
use lvfeeder::model::{aggregate_assignment, BuddyAssignment, Feeder, MonitoredPool};
use lvfeeder::rng::derive_seed;
use lvfeeder::series::{HalfHourlySeries, Window};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::{dataset_inputs, RunManifest};
use crate::{csv_rows, fmt_w};

pub const RESULTS_FILE: &str = "results.csv";
pub const ASSIGNMENTS_DIR: &str = "assignments";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BuddyMethod {
    /// Nearest mean daily demand within the group.
    Sa,
    /// Genetic algorithm on the weighted cost.
    Ga,
}

impl BuddyMethod {
    pub fn tag(self) -> &'static str {
        match self {
            BuddyMethod::Sa => "sa",
            BuddyMethod::Ga => "ga",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuddyConfig {
    pub seed: u64,
    /// Window the cost is evaluated over.
    pub train: Window,
    /// Window of the reported test RMAE.
    pub test: Window,
    /// Weights to run; absent means 0 to 1 in steps of 0.1 for GA and 1 for SA.
    pub w: Option<Vec<f64>>,
    /// GA settings; `w` and `seed` are set per run.
    pub ga: GaConfig,
}

impl Default for BuddyConfig {
    fn default() -> Self {
        BuddyConfig {
            seed: 0,
            train: Window::new(NaiveDate::from_ymd_opt(2015, 1, 5).expect("valid date"), 56),
            test: Window::new(NaiveDate::from_ymd_opt(2014, 9, 1).expect("valid date"), 365),
            w: None,
            ga: GaConfig::default(),
        }
    }
}

impl BuddyConfig {
    pub fn weights(&self, method: BuddyMethod) -> Vec<f64> {
        match (&self.w, method) {
            (Some(w), _) => w.clone(),
            (None, BuddyMethod::Ga) => (0..=10).map(|i| i as f64 / 10.0).collect(),
            (None, BuddyMethod::Sa) => vec![1.0],
        }
    }

    pub fn validate(&self, method: BuddyMethod) -> Result<()> {
        let w = self.weights(method);
        if w.is_empty() {
            return Err(CliError::Config("the weight list is empty".into()));
        }
        if let Some(bad) = w.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(CliError::Config(format!("weight {bad} outside [0, 1]")));
        }
        if self.train.days == 0 || self.test.days == 0 {
            return Err(CliError::Config("train and test windows need at least one day".into()));
        }
        if method == BuddyMethod::Ga {
            GaConfig { w: w[0], ..self.ga.clone() }.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuddyRecord {
    pub customer_id: String,
    pub profile_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

/// Contents of one assignment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentFile {
    pub feeder_id: String,
    pub method: BuddyMethod,
    pub w: f64,
    pub cost: CostBreakdown,
    pub buddies: Vec<BuddyRecord>,
    /// Best cost per generation; empty for SA.
    pub trace: Vec<f64>,
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuddyResult {
    pub feeder_id: String,
    pub method: BuddyMethod,
    pub w: f64,
    pub cost: f64,
    pub substation_term: f64,
    pub domestic_term: f64,
    pub non_domestic_term: f64,
    pub train_rmae: Option<f64>,
    pub test_rmae: Option<f64>,
    /// Mean half-hourly substation demand over the test window, kWh.
    pub mean_demand_kwh: Option<f64>,
    pub n_customers: usize,
    pub n_non_domestic: usize,
    pub non_domestic_proportion: f64,
    pub bucket: ProportionBucket,
    pub generations: usize,
    pub evaluations: usize,
    /// Assignment file, relative to the output directory.
    pub assignment: String,
}

pub struct BuddyRun {
    pub manifest: RunManifest,
    pub results: Vec<BuddyResult>,
    pub assignments: Vec<AssignmentFile>,
}

fn records(feeder: &Feeder, pool: &MonitoredPool, a: &BuddyAssignment) -> Vec<BuddyRecord> {
    feeder
        .customers
        .iter()
        .zip(&a.buddies)
        .map(|(c, b)| BuddyRecord {
            customer_id: c.id.clone(),
            profile_id: pool.get(b.profile).id.clone(),
            alpha: b.alpha,
        })
        .collect()
}

fn window_rmae(sub: &HalfHourlySeries, est: &HalfHourlySeries, window: Window) -> Result<Option<f64>> {
    if !sub.window().contains_window(&window) || !est.window().contains_window(&window) {
        return Ok(None);
    }
    Ok(Some(rmae(&sub.slice(window)?, &est.slice(window)?)?))
}

fn buddy_one(
    feeder: &Feeder,
    pool: &MonitoredPool,
    cfg: &BuddyConfig,
    method: BuddyMethod,
    w: f64,
) -> Result<(BuddyResult, AssignmentFile)> {
    let (assignment, breakdown, trace, generations, evaluations) = match method {
        BuddyMethod::Sa => {
            let a = simple_buddy(feeder, pool)?;
            let c = cost(feeder, &a, pool, w, cfg.train)?;
            (a, c, Vec::new(), 0, 1)
        }
        BuddyMethod::Ga => {
            let ga = GaConfig {
                w,
                seed: derive_seed(cfg.seed, &format!("ga/{}/{}", feeder.id, fmt_w(w))),
                ..cfg.ga.clone()
            };
            let out = ga_buddy(feeder, pool, cfg.train, &ga)?;
            (out.assignment, out.cost, out.trace, out.generations, out.evaluations)
        }
    };
    let estimate = aggregate_assignment(feeder, &assignment, pool)?;
    let (train_rmae, test_rmae, mean_demand_kwh) = match &feeder.substation {
        Some(sub) => {
            let mean = sub
                .window()
                .contains_window(&cfg.test)
                .then(|| sub.slice(cfg.test).map(|s| s.total() / s.len() as f64))
                .transpose()?;
            (
                window_rmae(sub, &estimate, cfg.train)?,
                window_rmae(sub, &estimate, cfg.test)?,
                mean,
            )
        }
        None => (None, None, None),
    };
    let proportion = non_domestic_proportion(feeder);
    let path = format!("{ASSIGNMENTS_DIR}/{}/{}_w{}.json", feeder.id, method.tag(), fmt_w(w));
    let file = AssignmentFile {
        feeder_id: feeder.id.clone(),
        method,
        w,
        cost: breakdown,
        buddies: records(feeder, pool, &assignment),
        trace,
    };
    let result = BuddyResult {
        feeder_id: feeder.id.clone(),
        method,
        w,
        cost: breakdown.total,
        substation_term: breakdown.substation_term,
        domestic_term: breakdown.domestic_term,
        non_domestic_term: breakdown.non_domestic_term,
        train_rmae,
        test_rmae,
        mean_demand_kwh,
        n_customers: feeder.len(),
        n_non_domestic: feeder.n_non_domestic(),
        non_domestic_proportion: proportion,
        bucket: ProportionBucket::of(proportion),
        generations,
        evaluations,
        assignment: path,
    };
    Ok((result, file))
}

/// Buddies every feeder of the dataset in `data` for each weight.
pub fn run_buddy(data: &Path, cfg: &BuddyConfig, method: BuddyMethod, out: &Path) -> Result<BuddyRun> {
    cfg.validate(method)?;
    let weights = cfg.weights(method);
    let mut manifest = RunManifest::new(&format!("buddy --method {}", method.tag()), cfg)?;
    manifest.seeds.insert("master".into(), cfg.seed);
    manifest.inputs = dataset_inputs(data)?;
    let dataset = manifest.time("load", || Dataset::load(data))?;

    let jobs: Vec<(&Feeder, f64)> = dataset
        .feeders
        .iter()
        .flat_map(|f| weights.iter().map(move |&w| (f, w)))
        .collect();
    let done = manifest.time("buddy", || {
        jobs.par_iter()
            .map(|&(f, w)| {
                buddy_one(f, &dataset.pool, cfg, method, w)
                    .map_err(|e| prefix(e, &format!("feeder {} at w = {}", f.id, fmt_w(w))))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (results, assignments): (Vec<_>, Vec<_>) = done.into_iter().unzip();

    let mut written: Vec<PathBuf> = Vec::with_capacity(results.len() + 1);
    manifest.time("write", || -> Result<()> {
        for (r, a) in results.iter().zip(&assignments) {
            let p = out.join(&r.assignment);
            write_json(&p, a)?;
            written.push(p);
        }
        let p = out.join(RESULTS_FILE);
        write_atomic(&p, &csv_rows(&results)?)?;
        written.push(p);
        Ok(())
    })?;
    let manifest = manifest.finish(out, &written)?;
    Ok(BuddyRun {
        manifest,
        results,
        assignments,
    })
}

/// Adds context to an error without changing its class.
pub(crate) fn prefix(e: CliError, context: &str) -> CliError {
    match e {
        CliError::Config(m) => CliError::Config(format!("{context}: {m}")),
        CliError::Data(m) => CliError::Data(format!("{context}: {m}")),
        CliError::Numerical(m) => CliError::Numerical(format!("{context}: {m}")),
    }
}

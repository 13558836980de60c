//! The confidence-band pipeline: bands per feeder over the evaluation
//! window, scored by normalised CRPS and summarised by proportion bucket.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use lvfeeder::evaluation::{non_domestic_proportion, normalized_crps_at, ProportionBucket};
use lvfeeder::ingestion::files::write_atomic;
use lvfeeder::ingestion::Dataset;
use lvfeeder::model::{Feeder, MonitoredPool};
use lvfeeder::rng::derive_seed;
use lvfeeder::series::Window;
use lvfeeder::uncertainty::{
    bands_csv_bytes, bootstrap_bands, fit_quantile_model, predict_bands, BootstrapConfig, ConfidenceBands, QrConfig,
    ScalingDist,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buddy::prefix;
use crate::csv_rows;
use crate::error::{CliError, Result};
use crate::manifest::{dataset_inputs, RunManifest};

pub const CRPS_FILE: &str = "crps.csv";
pub const SUMMARY_FILE: &str = "crps_summary.csv";
pub const BANDS_DIR: &str = "bands";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum BoundsMethod {
    BootstrapUniform,
    BootstrapGaussian,
    Qr,
}

impl BoundsMethod {
    pub fn tag(self) -> &'static str {
        match self {
            BoundsMethod::BootstrapUniform => "bootstrap-uniform",
            BoundsMethod::BootstrapGaussian => "bootstrap-gaussian",
            BoundsMethod::Qr => "qr",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub seed: u64,
    /// Window the bands cover and are scored over.
    pub evaluation: Window,
    /// Quantile-regression training window; absent means the whole substation series.
    pub qr_train: Option<Window>,
    pub qr: QrConfig,
    /// Bootstrap settings; `scaling` and `seed` are set by the method and per feeder.
    pub bootstrap: BootstrapConfig,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig {
            seed: 0,
            evaluation: Window::new(NaiveDate::from_ymd_opt(2014, 9, 23).expect("valid date"), 365),
            qr_train: None,
            qr: QrConfig::default(),
            bootstrap: BootstrapConfig::default(),
        }
    }
}

impl BoundsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.evaluation.days == 0 {
            return Err(CliError::Config("the evaluation window is empty".into()));
        }
        self.bootstrap.validate()?;
        let q = &self.qr;
        if !(0.0 < q.lower_tau && q.lower_tau < q.upper_tau && q.upper_tau < 1.0) {
            return Err(CliError::Config(format!(
                "quantile levels must satisfy 0 < lower < upper < 1, got {} and {}",
                q.lower_tau, q.upper_tau
            )));
        }
        Ok(())
    }

    /// The two quantile levels the bands of `method` stand for.
    pub fn levels(&self, method: BoundsMethod) -> (f64, f64) {
        match method {
            BoundsMethod::Qr => (self.qr.lower_tau, self.qr.upper_tau),
            _ => (self.bootstrap.lower_quantile, self.bootstrap.upper_quantile),
        }
    }
}

/// One row of `crps.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpsResult {
    pub feeder_id: String,
    pub method: String,
    /// Absent when the feeder has no substation series over the window.
    pub ncrps: Option<f64>,
    /// Mean half-hourly substation demand over the window, kWh.
    pub mean_demand_kwh: Option<f64>,
    pub n_customers: usize,
    pub n_non_domestic: usize,
    pub non_domestic_proportion: f64,
    pub bucket: ProportionBucket,
    pub crossings_repaired: usize,
    /// Bands file, relative to the output directory.
    pub bands: String,
}

/// One row of `crps_summary.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrpsSummaryRow {
    /// `all`, `domestic-only`, `small`, `medium` or `large`.
    pub group: String,
    pub method: String,
    pub n_feeders: usize,
    pub mean_ncrps: Option<f64>,
}

pub struct BoundsRun {
    pub manifest: RunManifest,
    pub results: Vec<CrpsResult>,
    pub summary: Vec<CrpsSummaryRow>,
    pub bands: Vec<ConfidenceBands>,
}

pub fn feeder_bands(
    feeder: &Feeder,
    pool: &MonitoredPool,
    cfg: &BoundsConfig,
    method: BoundsMethod,
) -> Result<ConfidenceBands> {
    let bootstrap = |scaling| {
        let b = BootstrapConfig {
            scaling,
            // the stream does not depend on the scaling, so domestic draws agree across variants
            seed: derive_seed(cfg.seed, &format!("bootstrap/{}", feeder.id)),
            ..cfg.bootstrap.clone()
        };
        Ok(bootstrap_bands(feeder, pool, cfg.evaluation, &b)?)
    };
    match method {
        BoundsMethod::BootstrapUniform => bootstrap(ScalingDist::Uniform),
        BoundsMethod::BootstrapGaussian => bootstrap(ScalingDist::Gaussian),
        BoundsMethod::Qr => {
            let sub = feeder.substation()?;
            let train = cfg.qr_train.unwrap_or_else(|| sub.window());
            let origin = sub.start();
            let p = cfg.qr.fourier_order;
            let low = fit_quantile_model(sub, train, origin, cfg.qr.lower_tau, p)?;
            let high = fit_quantile_model(sub, train, origin, cfg.qr.upper_tau, p)?;
            Ok(predict_bands(&low, &high, cfg.evaluation)?)
        }
    }
}

fn score(feeder: &Feeder, bands: &ConfidenceBands, window: Window, levels: (f64, f64)) -> Result<(Option<f64>, Option<f64>)> {
    let Some(sub) = feeder.substation.as_ref().filter(|s| s.window().contains_window(&window)) else {
        return Ok((None, None));
    };
    let actual = sub.slice(window)?;
    let mean = actual.total() / actual.len() as f64;
    Ok((Some(normalized_crps_at(&actual, bands, levels.0, levels.1)?), Some(mean)))
}

/// Mean nCRPS per feeder group, in the fixed row order.
pub fn summarize(results: &[CrpsResult], method: &str) -> Vec<CrpsSummaryRow> {
    let groups: [(&str, Option<ProportionBucket>); 5] = [
        ("all", None),
        ("domestic-only", Some(ProportionBucket::None)),
        ("small", Some(ProportionBucket::Small)),
        ("medium", Some(ProportionBucket::Medium)),
        ("large", Some(ProportionBucket::Large)),
    ];
    groups
        .iter()
        .map(|&(group, bucket)| {
            let scores: Vec<f64> = results
                .iter()
                .filter(|r| bucket.is_none_or(|b| r.bucket == b))
                .filter_map(|r| r.ncrps)
                .collect();
            CrpsSummaryRow {
                group: group.to_string(),
                method: method.to_string(),
                n_feeders: scores.len(),
                mean_ncrps: (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64),
            }
        })
        .collect()
}

/// Builds and scores bands for every feeder of the dataset in `data`.
pub fn run_bounds(data: &Path, cfg: &BoundsConfig, method: BoundsMethod, out: &Path) -> Result<BoundsRun> {
    cfg.validate()?;
    let mut manifest = RunManifest::new(&format!("bounds --method {}", method.tag()), cfg)?;
    manifest.seeds.insert("master".into(), cfg.seed);
    manifest.inputs = dataset_inputs(data)?;
    let dataset = manifest.time("load", || Dataset::load(data))?;
    if method == BoundsMethod::Qr {
        if let Some(f) = dataset.feeders.iter().find(|f| f.substation.is_none()) {
            return Err(CliError::Data(format!(
                "feeder {} has no substation series, which quantile regression requires",
                f.id
            )));
        }
    }

    let levels = cfg.levels(method);
    let done = manifest.time("bands", || {
        dataset
            .feeders
            .par_iter()
            .map(|f| {
                let run = || -> Result<(CrpsResult, ConfidenceBands)> {
                    let bands = feeder_bands(f, &dataset.pool, cfg, method)?;
                    let (ncrps, mean_demand_kwh) = score(f, &bands, cfg.evaluation, levels)?;
                    let proportion = non_domestic_proportion(f);
                    let result = CrpsResult {
                        feeder_id: f.id.clone(),
                        method: method.tag().to_string(),
                        ncrps,
                        mean_demand_kwh,
                        n_customers: f.len(),
                        n_non_domestic: f.n_non_domestic(),
                        non_domestic_proportion: proportion,
                        bucket: ProportionBucket::of(proportion),
                        crossings_repaired: bands.crossings_repaired,
                        bands: format!("{BANDS_DIR}/{}.csv", f.id),
                    };
                    Ok((result, bands))
                };
                run().map_err(|e| prefix(e, &format!("feeder {}", f.id)))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (results, bands): (Vec<_>, Vec<_>) = done.into_iter().unzip();
    let summary = summarize(&results, method.tag());

    let mut written: Vec<PathBuf> = Vec::new();
    manifest.time("write", || -> Result<()> {
        for (r, b) in results.iter().zip(&bands) {
            let p = out.join(&r.bands);
            write_atomic(&p, &bands_csv_bytes(b)?)?;
            written.push(p);
        }
        for (name, bytes) in [(CRPS_FILE, csv_rows(&results)?), (SUMMARY_FILE, csv_rows(&summary)?)] {
            let p = out.join(name);
            write_atomic(&p, &bytes)?;
            written.push(p);
        }
        Ok(())
    })?;
    let manifest = manifest.finish(out, &written)?;
    Ok(BoundsRun {
        manifest,
        results,
        summary,
        bands,
    })
}

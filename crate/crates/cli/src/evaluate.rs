//! Error-versus-demand fits, scatter data and alpha histograms from the
//! outputs of `buddy` and `bounds` runs.

use std::path::{Path, PathBuf};

use lvfeeder::evaluation::{alpha_histogram, power_law_fit, PowerLawFit, ProportionBucket};
use lvfeeder::ingestion::files::{read_json, write_atomic, write_json};
use lvfeeder::model::{ALPHA_MAX, ALPHA_MIN};
use serde::{Deserialize, Serialize};

use crate::bounds::{CrpsResult, CRPS_FILE};
use crate::buddy::{AssignmentFile, BuddyMethod, BuddyResult, RESULTS_FILE};
use crate::error::{CliError, Result};
use crate::manifest::{digest_tree, RunManifest, MANIFEST_FILE};
use crate::{csv_rows, read_csv_rows};

pub const FITS_FILE: &str = "fits.json";
pub const SCATTER_FILE: &str = "scatter.csv";
pub const CURVES_FILE: &str = "fit_curves.csv";
pub const HISTOGRAM_FILE: &str = "alpha_histogram.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// GA weights whose alphas are histogrammed.
    pub histogram_weights: Vec<f64>,
    pub histogram_bins: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    /// Log-spaced samples of each fitted curve.
    pub curve_points: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            histogram_weights: vec![0.0, 0.5, 0.9],
            histogram_bins: 20,
            alpha_min: ALPHA_MIN,
            alpha_max: ALPHA_MAX,
            curve_points: 50,
        }
    }
}

/// A fitted series: the metric, the method that produced it and, for buddying, the weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesKey {
    /// `rmae` or `ncrps`.
    pub metric: String,
    pub method: String,
    pub w: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    #[serde(flatten)]
    pub key: SeriesKey,
    pub fit: PowerLawFit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFit {
    #[serde(flatten)]
    pub key: SeriesKey,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitsFile {
    pub fits: Vec<FitRecord>,
    pub skipped: Vec<SkippedFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub metric: String,
    pub method: String,
    pub w: Option<f64>,
    pub feeder_id: String,
    pub mean_demand_kwh: f64,
    pub value: f64,
    pub bucket: ProportionBucket,
    /// Inside the fit's 99% band; absent when the series was not fitted.
    pub inside_99: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub metric: String,
    pub method: String,
    pub w: Option<f64>,
    pub x: f64,
    pub fit: f64,
    pub lower_99: f64,
    pub upper_99: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub w: f64,
    /// Bin index, or `below` / `above` for values outside the range.
    pub bin: String,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub count: u64,
}

pub struct EvaluateRun {
    pub manifest: RunManifest,
    pub fits: FitsFile,
    pub scatter: Vec<ScatterRow>,
    pub histogram: Vec<HistogramRow>,
}

struct Series {
    key: SeriesKey,
    points: Vec<(String, f64, f64, ProportionBucket)>,
}

fn push_point(series: &mut Vec<Series>, key: SeriesKey, point: (String, f64, f64, ProportionBucket)) {
    match series.iter_mut().find(|s| s.key == key) {
        Some(s) => s.points.push(point),
        None => series.push(Series { key, points: vec![point] }),
    }
}

/// Log-spaced samples over the span of the fitted points.
fn curve(key: &SeriesKey, fit: &PowerLawFit, n: usize) -> Vec<CurveRow> {
    let lo = fit.points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min).ln();
    let hi = fit.points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max).ln();
    (0..n)
        .map(|i| {
            let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            let x = (lo + t * (hi - lo)).exp();
            let (lower_99, upper_99) = fit.bounds(x);
            CurveRow {
                metric: key.metric.clone(),
                method: key.method.clone(),
                w: key.w,
                x,
                fit: fit.predict(x),
                lower_99,
                upper_99,
            }
        })
        .collect()
}

/// Fits and summarises the results found in `results_dirs`.
pub fn run_evaluate(results_dirs: &[PathBuf], cfg: &EvaluateConfig, out: &Path) -> Result<EvaluateRun> {
    if results_dirs.is_empty() {
        return Err(CliError::Config("no results directories given".into()));
    }
    if cfg.histogram_bins == 0 || !(cfg.alpha_min < cfg.alpha_max) {
        return Err(CliError::Config("histogram needs bins > 0 and alpha_min < alpha_max".into()));
    }
    let mut manifest = RunManifest::new("evaluate", cfg)?;
    let mut series: Vec<Series> = Vec::new();
    let mut by_w: Vec<(f64, Vec<f64>)> = cfg.histogram_weights.iter().map(|&w| (w, Vec::new())).collect();
    let mut found = false;

    for (i, dir) in results_dirs.iter().enumerate() {
        let mut inputs = digest_tree(dir, |p| !p.ends_with(MANIFEST_FILE) && !p.split('/').any(|c| c.starts_with('.')))?;
        for d in &mut inputs {
            d.path = format!("results{i}/{}", d.path);
        }
        manifest.inputs.extend(inputs);

        let buddy = dir.join(RESULTS_FILE);
        if buddy.exists() {
            found = true;
            for r in read_csv_rows::<BuddyResult>(&buddy)? {
                if let (Some(x), Some(y)) = (r.mean_demand_kwh, r.test_rmae) {
                    let key = SeriesKey {
                        metric: "rmae".into(),
                        method: r.method.tag().into(),
                        w: Some(r.w),
                    };
                    push_point(&mut series, key, (r.feeder_id.clone(), x, y, r.bucket));
                }
                if r.method != BuddyMethod::Ga {
                    continue;
                }
                if let Some((_, alphas)) = by_w.iter_mut().find(|(w, _)| (w - r.w).abs() < 1e-9) {
                    let file: AssignmentFile = read_json(&dir.join(&r.assignment))?;
                    alphas.extend(file.buddies.iter().filter_map(|b| b.alpha));
                }
            }
        }
        let crps = dir.join(CRPS_FILE);
        if crps.exists() {
            found = true;
            for r in read_csv_rows::<CrpsResult>(&crps)? {
                if let (Some(x), Some(y)) = (r.mean_demand_kwh, r.ncrps) {
                    let key = SeriesKey {
                        metric: "ncrps".into(),
                        method: r.method.clone(),
                        w: None,
                    };
                    push_point(&mut series, key, (r.feeder_id.clone(), x, y, r.bucket));
                }
            }
        }
    }
    if !found {
        return Err(CliError::Data(format!(
            "no {RESULTS_FILE} or {CRPS_FILE} found in the results directories"
        )));
    }
    if series.is_empty() {
        return Err(CliError::Data(
            "results hold no scored feeders (substation series are needed for RMAE and nCRPS)".into(),
        ));
    }

    let mut fits = FitsFile {
        fits: Vec::new(),
        skipped: Vec::new(),
    };
    let mut scatter = Vec::new();
    let mut curves = Vec::new();
    manifest.time("fit", || {
        for s in &series {
            let points: Vec<(f64, f64)> = s.points.iter().map(|p| (p.1, p.2)).collect();
            let fit = power_law_fit(&points);
            for (k, (feeder_id, x, y, bucket)) in s.points.iter().enumerate() {
                scatter.push(ScatterRow {
                    metric: s.key.metric.clone(),
                    method: s.key.method.clone(),
                    w: s.key.w,
                    feeder_id: feeder_id.clone(),
                    mean_demand_kwh: *x,
                    value: *y,
                    bucket: *bucket,
                    inside_99: fit.as_ref().ok().map(|f| f.inside[k]),
                });
            }
            match fit {
                Ok(fit) => {
                    curves.extend(curve(&s.key, &fit, cfg.curve_points));
                    fits.fits.push(FitRecord { key: s.key.clone(), fit });
                }
                Err(e) => fits.skipped.push(SkippedFit {
                    key: s.key.clone(),
                    reason: e.to_string(),
                }),
            }
        }
    });
    if fits.fits.is_empty() {
        let reasons: Vec<String> = fits
            .skipped
            .iter()
            .map(|s| format!("{} {}: {}", s.key.metric, s.key.method, s.reason))
            .collect();
        return Err(CliError::Data(format!("no power-law fit possible: {}", reasons.join("; "))));
    }

    by_w.retain(|(_, a)| !a.is_empty());
    let mut histogram = Vec::new();
    if !by_w.is_empty() {
        let h = alpha_histogram(&by_w, cfg.alpha_min, cfg.alpha_max, cfg.histogram_bins)?;
        for row in &h.rows {
            let edge = |k: usize| Some(h.edges[k]);
            histogram.extend(row.counts.iter().enumerate().map(|(k, &count)| HistogramRow {
                w: row.w,
                bin: k.to_string(),
                lower: edge(k),
                upper: edge(k + 1),
                count,
            }));
            histogram.push(HistogramRow {
                w: row.w,
                bin: "below".into(),
                lower: None,
                upper: edge(0),
                count: row.below,
            });
            histogram.push(HistogramRow {
                w: row.w,
                bin: "above".into(),
                lower: edge(h.edges.len() - 1),
                upper: None,
                count: row.above,
            });
        }
    }

    let mut written = Vec::new();
    manifest.time("write", || -> Result<()> {
        let p = out.join(FITS_FILE);
        write_json(&p, &fits)?;
        written.push(p);
        for (name, bytes) in [(SCATTER_FILE, csv_rows(&scatter)?), (CURVES_FILE, csv_rows(&curves)?)] {
            let p = out.join(name);
            write_atomic(&p, &bytes)?;
            written.push(p);
        }
        if !histogram.is_empty() {
            let p = out.join(HISTOGRAM_FILE);
            write_atomic(&p, &csv_rows(&histogram)?)?;
            written.push(p);
        }
        Ok(())
    })?;
    let manifest = manifest.finish(out, &written)?;
    Ok(EvaluateRun {
        manifest,
        fits,
        scatter,
        histogram,
    })
}

//! Feeder-level confidence bands: a customer bootstrap and per-half-hour
//! quantile regression.

pub mod bootstrap;
pub mod qr;

use std::path::Path;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::files::{self, parse_err, parse_opt_f64, records, TIMESTAMP_FORMAT};
use crate::series::{slot_timestamp, HalfHourlySeries, SLOTS_PER_DAY};

pub use bootstrap::{bootstrap_bands, gaussian_sigma, BootstrapConfig, ScalingDist};
pub use qr::{design_row, fit_quantile_model, predict_bands, QrConfig, QuantileModel};

/// Pinball loss `|z (tau - 1{z < 0})|`.
pub fn pinball(z: f64, tau: f64) -> f64 {
    debug_assert!(tau > 0.0 && tau < 1.0);
    let indicator = if z < 0.0 { 1.0 } else { 0.0 };
    (z * (tau - indicator)).abs()
}

/// Lower and upper quantile series over one window, with `lower <= upper` slot-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBands {
    pub lower: HalfHourlySeries,
    pub upper: HalfHourlySeries,
    pub method: String,
    /// Slots where the raw lower value exceeded the upper one and the two were swapped.
    pub crossings_repaired: usize,
}

impl ConfidenceBands {
    pub fn new(lower: HalfHourlySeries, upper: HalfHourlySeries, method: impl Into<String>) -> Result<Self> {
        lower.check_same_window(&upper)?;
        if let Some(t) = lower.values().iter().zip(upper.values()).position(|(l, u)| l > u) {
            return Err(Error::domain(format!(
                "lower band exceeds upper band at slot {t}"
            )));
        }
        Ok(ConfidenceBands {
            lower,
            upper,
            method: method.into(),
            crossings_repaired: 0,
        })
    }

    /// Builds bands from raw quantile values, swapping any crossed pairs.
    pub fn repaired(
        start: chrono::NaiveDate,
        mut lower: Vec<f64>,
        mut upper: Vec<f64>,
        allows_negative: bool,
        method: impl Into<String>,
    ) -> Result<Self> {
        let mut crossings = 0;
        for (l, u) in lower.iter_mut().zip(upper.iter_mut()) {
            if *l > *u {
                std::mem::swap(l, u);
                crossings += 1;
            }
        }
        let mut bands = ConfidenceBands::new(
            HalfHourlySeries::build(start, lower, allows_negative)?,
            HalfHourlySeries::build(start, upper, allows_negative)?,
            method,
        )?;
        bands.crossings_repaired = crossings;
        Ok(bands)
    }

    pub fn slice(&self, window: crate::series::Window) -> Result<Self> {
        Ok(ConfidenceBands {
            lower: self.lower.slice(window)?,
            upper: self.upper.slice(window)?,
            method: self.method.clone(),
            crossings_repaired: self.crossings_repaired,
        })
    }
}

pub fn bands_csv_bytes(bands: &ConfidenceBands) -> Result<Vec<u8>> {
    let s = &bands.lower;
    files::csv_bytes(
        &["timestamp", "lower_kwh", "upper_kwh"],
        (0..s.len()).map(|t| {
            let (date, h) = s.slot_datetime(t);
            [
                slot_timestamp(date, h).format(TIMESTAMP_FORMAT).to_string(),
                bands.lower.values()[t].to_string(),
                bands.upper.values()[t].to_string(),
            ]
        }),
    )
}

pub fn write_bands_csv(path: &Path, bands: &ConfidenceBands) -> Result<()> {
    files::write_atomic(path, &bands_csv_bytes(bands)?)
}

/// Reads a bands CSV; `method` labels the result.
pub fn read_bands_csv(path: &Path, method: &str) -> Result<ConfidenceBands> {
    let (header, rows) = records(path)?;
    if header.iter().ne(["timestamp", "lower_kwh", "upper_kwh"].iter().copied()) {
        return Err(parse_err(path, 1, "header must be timestamp,lower_kwh,upper_kwh"));
    }
    let mut start = None;
    let mut lower = Vec::with_capacity(rows.len());
    let mut upper = Vec::with_capacity(rows.len());
    for (i, (line, rec)) in rows.iter().enumerate() {
        if rec.len() != 3 {
            return Err(parse_err(path, *line, "expected 3 fields"));
        }
        let ts = NaiveDateTime::parse_from_str(&rec[0], TIMESTAMP_FORMAT)
            .map_err(|e| parse_err(path, *line, format!("bad timestamp {:?}: {e}", &rec[0])))?;
        let first = *start.get_or_insert(ts.date());
        let expected = slot_timestamp(
            first + chrono::Days::new((i / SLOTS_PER_DAY) as u64),
            i % SLOTS_PER_DAY,
        );
        if ts != expected {
            return Err(parse_err(path, *line, format!("expected timestamp {expected}")));
        }
        let field = |k: usize| -> Result<f64> {
            parse_opt_f64(path, *line, &rec[k])?.ok_or_else(|| parse_err(path, *line, "empty value"))
        };
        lower.push(field(1)?);
        upper.push(field(2)?);
    }
    let start = start.ok_or_else(|| parse_err(path, 1, "no rows"))?;
    if lower.len() % SLOTS_PER_DAY != 0 {
        return Err(parse_err(path, rows.len() + 1, "file does not end on a whole day"));
    }
    ConfidenceBands::new(
        HalfHourlySeries::build(start, lower, true)?,
        HalfHourlySeries::build(start, upper, true)?,
        method,
    )
}

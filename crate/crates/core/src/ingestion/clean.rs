//! Replacement of missing and anomalous half-hourly readings.
//!
//! A slot is anomalous when it is missing, negative (for series that may not
//! go negative) or above the mean plus `outlier_sigma` standard deviations of
//! the other readings at the same slot of the week. Anomalous slots take the
//! mean of the nearest valid same-slot-of-week readings from neighbouring
//! weeks. Detection and replacement repeat until no slot is flagged, so a
//! cleaned series passes through a second cleaning unchanged.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{slot_of_week, HalfHourlySeries, SLOTS_PER_DAY, SLOTS_PER_WEEK};

/// A series as read from disk: `None` marks a missing reading.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub start: NaiveDate,
    pub values: Vec<Option<f64>>,
    pub allows_negative: bool,
}

impl RawSeries {
    pub fn from_series(s: &HalfHourlySeries) -> Self {
        RawSeries {
            start: s.start(),
            values: s.values().iter().map(|v| Some(*v)).collect(),
            allows_negative: s.allows_negative(),
        }
    }

    /// Converts directly, failing on any missing value.
    pub fn into_series(self) -> Result<HalfHourlySeries> {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v.ok_or_else(|| Error::domain(format!("missing value at slot {i}"))))
            .collect::<Result<Vec<_>>>()?;
        HalfHourlySeries::build(self.start, values, self.allows_negative)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CleaningPolicy {
    /// Standard deviations above the slot-of-week mean that mark an outlier.
    pub outlier_sigma: f64,
    /// Donor readings averaged into a replacement.
    pub donors: usize,
    /// Largest tolerated fraction of missing slots.
    pub max_missing_fraction: f64,
    /// Minimum number of other same-slot-of-week readings needed to judge an outlier.
    /// The leave-one-out deviation of fewer peers is too noisy for the threshold.
    pub min_peers: usize,
    pub max_passes: usize,
}

impl Default for CleaningPolicy {
    fn default() -> Self {
        CleaningPolicy {
            outlier_sigma: 5.0,
            donors: 4,
            max_missing_fraction: 0.5,
            min_peers: 12,
            max_passes: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnomalyKind {
    Missing,
    Negative,
    Outlier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub slot: usize,
    pub kind: AnomalyKind,
    pub original: Option<f64>,
    pub value: f64,
}

/// What cleaning changed, with the policy used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub missing: usize,
    pub negative: usize,
    pub outliers: usize,
    /// Ordered by strictly increasing slot.
    pub replacements: Vec<Replacement>,
    pub policy: CleaningPolicy,
}

impl CleaningReport {
    pub fn is_empty(&self) -> bool {
        self.replacements.is_empty()
    }
}

/// Cleans a raw series.
pub fn clean_series(raw: &RawSeries, policy: &CleaningPolicy) -> Result<(HalfHourlySeries, CleaningReport)> {
    let n = raw.values.len();
    if !n.is_multiple_of(SLOTS_PER_DAY) {
        return Err(Error::domain(format!("series length {n} is not whole days")));
    }
    if n < SLOTS_PER_WEEK {
        return Err(Error::domain(format!(
            "series of {n} slots is shorter than one week; cannot find similar hours"
        )));
    }
    let missing = raw.values.iter().filter(|v| v.is_none()).count();
    if missing as f64 > policy.max_missing_fraction * n as f64 {
        return Err(Error::domain(format!(
            "{missing} of {n} slots missing; series unusable"
        )));
    }
    if let Some(v) = raw.values.iter().flatten().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("non-finite reading {v}")));
    }

    // slots sharing a slot-of-week, in time order
    let week_slot: Vec<usize> = (0..n)
        .map(|t| {
            let date = raw.start + chrono::Days::new((t / SLOTS_PER_DAY) as u64);
            slot_of_week(date, t % SLOTS_PER_DAY)
        })
        .collect();
    let mut peers: Vec<Vec<usize>> = vec![Vec::new(); SLOTS_PER_WEEK];
    for (t, &k) in week_slot.iter().enumerate() {
        peers[k].push(t);
    }

    let mut values = raw.values.clone();
    let mut changed: BTreeMap<usize, Replacement> = BTreeMap::new();
    let mut converged = false;
    for _ in 0..policy.max_passes.max(1) {
        let flagged = detect(&values, &peers, &week_slot, raw.allows_negative, policy);
        if flagged.is_empty() {
            converged = true;
            break;
        }
        let is_flagged: std::collections::HashSet<usize> = flagged.iter().map(|(t, _)| *t).collect();
        let mut next = values.clone();
        for &(t, kind) in &flagged {
            let replacement = donor_mean(&values, &peers[week_slot[t]], t, &is_flagged, policy.donors)
                .ok_or_else(|| {
                    Error::domain(format!("no valid readings similar to slot {t} to fill it"))
                })?;
            next[t] = Some(replacement);
            changed
                .entry(t)
                .and_modify(|r| r.value = replacement)
                .or_insert(Replacement {
                    slot: t,
                    kind,
                    original: raw.values[t],
                    value: replacement,
                });
        }
        values = next;
    }
    if !converged && !detect(&values, &peers, &week_slot, raw.allows_negative, policy).is_empty() {
        return Err(Error::Numerical(format!(
            "cleaning did not settle within {} passes",
            policy.max_passes
        )));
    }

    let replacements: Vec<Replacement> = changed.into_values().collect();
    let count = |k: AnomalyKind| replacements.iter().filter(|r| r.kind == k).count();
    let report = CleaningReport {
        missing: count(AnomalyKind::Missing),
        negative: count(AnomalyKind::Negative),
        outliers: count(AnomalyKind::Outlier),
        replacements,
        policy: *policy,
    };
    let values: Vec<f64> = values.into_iter().map(|v| v.expect("filled")).collect();
    let series = HalfHourlySeries::build(raw.start, values, raw.allows_negative)?;
    Ok((series, report))
}

fn detect(
    values: &[Option<f64>],
    peers: &[Vec<usize>],
    week_slot: &[usize],
    allows_negative: bool,
    policy: &CleaningPolicy,
) -> Vec<(usize, AnomalyKind)> {
    // per slot-of-week sums over present readings, for leave-one-out statistics
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); SLOTS_PER_WEEK];
    for (k, ts) in peers.iter().enumerate() {
        for &t in ts {
            if let Some(v) = values[t] {
                sums[k].0 += v;
                sums[k].1 += v * v;
                sums[k].2 += 1;
            }
        }
    }
    let mut out = Vec::new();
    for (t, v) in values.iter().enumerate() {
        let Some(v) = *v else {
            out.push((t, AnomalyKind::Missing));
            continue;
        };
        if !allows_negative && v < 0.0 {
            out.push((t, AnomalyKind::Negative));
            continue;
        }
        let (s, s2, c) = sums[week_slot[t]];
        let others = c - 1;
        if others < policy.min_peers {
            continue;
        }
        let m = others as f64;
        let mean = (s - v) / m;
        let var = ((s2 - v * v) - m * mean * mean) / (m - 1.0);
        let sd = var.max(0.0).sqrt();
        let limit = mean + policy.outlier_sigma * sd;
        // relative slack absorbs rounding in the running sums
        if v > limit + 1e-9 * limit.abs().max(1e-12) {
            out.push((t, AnomalyKind::Outlier));
        }
    }
    out
}

/// Mean of up to `k` nearest same-slot-of-week readings that are present and unflagged.
fn donor_mean(
    values: &[Option<f64>],
    peers: &[usize],
    t: usize,
    flagged: &std::collections::HashSet<usize>,
    k: usize,
) -> Option<f64> {
    let pos = peers.iter().position(|&p| p == t)?;
    let usable = |i: usize| -> Option<f64> {
        let p = peers[i];
        if flagged.contains(&p) {
            None
        } else {
            values[p]
        }
    };
    let mut picked = Vec::with_capacity(k);
    let mut step = 1;
    while picked.len() < k && (step <= pos || pos + step < peers.len()) {
        if step <= pos {
            if let Some(v) = usable(pos - step) {
                picked.push(v);
            }
        }
        if picked.len() < k && pos + step < peers.len() {
            if let Some(v) = usable(pos + step) {
                picked.push(v);
            }
        }
        step += 1;
    }
    if picked.is_empty() {
        None
    } else {
        Some(picked.iter().sum::<f64>() / picked.len() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn monday() -> NaiveDate {
        NaiveDate::from_ymd_opt(2015, 1, 5).unwrap()
    }

    fn raw(values: Vec<Option<f64>>) -> RawSeries {
        RawSeries {
            start: monday(),
            values,
            allows_negative: false,
        }
    }

    /// Deterministic weekly pattern with a little variation between weeks.
    fn wavy(weeks: usize) -> Vec<f64> {
        (0..weeks * SLOTS_PER_WEEK)
            .map(|t| {
                let h = (t % SLOTS_PER_DAY) as f64;
                let w = (t / SLOTS_PER_WEEK) as f64;
                0.3 + 0.2 * (h / 48.0 * std::f64::consts::TAU).sin().abs() + 0.01 * ((w * 1.7 + h).sin())
            })
            .collect()
    }

    #[test]
    fn clean_input_is_unchanged() {
        let v = wavy(5);
        let (s, rep) = clean_series(&raw(v.iter().map(|x| Some(*x)).collect()), &CleaningPolicy::default()).unwrap();
        assert_eq!(s.values(), v.as_slice());
        assert!(rep.is_empty());
        assert_eq!((rep.missing, rep.negative, rep.outliers), (0, 0, 0));
    }

    #[test]
    fn missing_tuesday_nine_am_in_constant_series() {
        let c = 0.42;
        let mut v = vec![Some(c); 5 * SLOTS_PER_WEEK];
        let t = 2 * SLOTS_PER_WEEK + SLOTS_PER_DAY + 18; // week 2, Tuesday 09:00
        v[t] = None;
        let (s, rep) = clean_series(&raw(v), &CleaningPolicy::default()).unwrap();
        assert_eq!(s.values()[t], c);
        assert_eq!(rep.missing, 1);
        assert_eq!(rep.replacements[0].slot, t);
    }

    #[test]
    fn spike_is_replaced_by_neighbour_mean() {
        let mut v = wavy(14);
        let t = 2 * SLOTS_PER_WEEK + 3 * SLOTS_PER_DAY + 30; // week 2, Thursday 15:00
        let slot_mean: f64 = v.iter().sum::<f64>() / v.len() as f64;
        // oracle: weeks 1, 3, 0, 4 are the four nearest donors
        let oracle = [1, 3, 0, 4]
            .iter()
            .map(|w| v[t - 2 * SLOTS_PER_WEEK + w * SLOTS_PER_WEEK])
            .sum::<f64>()
            / 4.0;
        v[t] = 50.0 * slot_mean;
        let (s, rep) = clean_series(&raw(v.iter().map(|x| Some(*x)).collect()), &CleaningPolicy::default()).unwrap();
        assert_eq!(rep.outliers, 1);
        assert!((s.values()[t] - oracle).abs() < 1e-15);
        assert_eq!(rep.replacements[0].original, Some(50.0 * slot_mean));
    }

    #[test]
    fn negatives_are_replaced_unless_allowed() {
        let mut v: Vec<Option<f64>> = wavy(4).into_iter().map(Some).collect();
        v[100] = Some(-0.5);
        let (_, rep) = clean_series(&raw(v.clone()), &CleaningPolicy::default()).unwrap();
        assert_eq!(rep.negative, 1);
        let mut r = raw(v);
        r.allows_negative = true;
        let (s, rep) = clean_series(&r, &CleaningPolicy::default()).unwrap();
        assert_eq!(rep.negative, 0);
        assert_eq!(s.values()[100], -0.5);
    }

    #[test]
    fn mostly_missing_is_rejected() {
        let mut v: Vec<Option<f64>> = vec![None; 2 * SLOTS_PER_WEEK];
        for x in v.iter_mut().take(SLOTS_PER_WEEK - 1) {
            *x = Some(1.0);
        }
        assert!(clean_series(&raw(v), &CleaningPolicy::default()).is_err());
    }

    #[test]
    fn shorter_than_a_week_is_rejected() {
        let v = vec![Some(1.0); 6 * SLOTS_PER_DAY];
        assert!(clean_series(&raw(v), &CleaningPolicy::default()).is_err());
    }

    proptest! {
        #[test]
        fn cleaning_is_idempotent(
            base in proptest::collection::vec(0.0f64..2.0, SLOTS_PER_WEEK * 13),
            holes in proptest::collection::vec(0usize..SLOTS_PER_WEEK * 13, 0..40),
            spikes in proptest::collection::vec((0usize..SLOTS_PER_WEEK * 13, 10.0f64..200.0), 0..10),
        ) {
            let mut v: Vec<Option<f64>> = base.into_iter().map(Some).collect();
            for (t, x) in spikes { v[t] = Some(x); }
            for t in holes { v[t] = None; }
            let policy = CleaningPolicy::default();
            let (once, rep) = clean_series(&raw(v), &policy).unwrap();
            let slots: Vec<usize> = rep.replacements.iter().map(|r| r.slot).collect();
            prop_assert!(slots.windows(2).all(|w| w[0] < w[1]));
            let (twice, rep2) = clean_series(&RawSeries::from_series(&once), &policy).unwrap();
            prop_assert_eq!(once, twice);
            prop_assert!(rep2.is_empty());
        }
    }
}

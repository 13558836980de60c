//! Scores and summaries: RMAE, normalised CRPS, power-law error fits,
//! alpha histograms and per-feeder characterisation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Feeder;
use crate::series::{slot_of_week, HalfHourlySeries, SLOTS_PER_WEEK};
use crate::uncertainty::{pinball, ConfidenceBands};

/// Two-sided 99% standard-normal quantile.
pub const Z_99: f64 = 2.5758293035489004;

/// `sum |actual - estimate| / sum actual`.
pub fn rmae(actual: &HalfHourlySeries, estimate: &HalfHourlySeries) -> Result<f64> {
    actual.check_same_window(estimate)?;
    let total = actual.total();
    if total <= 0.0 {
        return Err(Error::DegenerateNormalizer(format!(
            "total actual demand is {total}"
        )));
    }
    let abs: f64 = actual
        .values()
        .iter()
        .zip(estimate.values())
        .map(|(s, a)| (s - a).abs())
        .sum();
    Ok(abs / total)
}

/// Mean two-quantile pinball score of the bands, divided by the mean half-hourly demand.
///
/// Each slot scores `0.5 * (pinball(y - lower, 0.1) + pinball(y - upper, 0.9))`.
pub fn normalized_crps(actual: &HalfHourlySeries, bands: &ConfidenceBands) -> Result<f64> {
    normalized_crps_at(actual, bands, 0.1, 0.9)
}

pub fn normalized_crps_at(
    actual: &HalfHourlySeries,
    bands: &ConfidenceBands,
    lower_tau: f64,
    upper_tau: f64,
) -> Result<f64> {
    actual.check_same_window(&bands.lower)?;
    let n = actual.len() as f64;
    let mean = actual.total() / n;
    if mean <= 0.0 {
        return Err(Error::DegenerateNormalizer(format!(
            "mean half-hourly demand is {mean}"
        )));
    }
    let score: f64 = actual
        .values()
        .iter()
        .zip(bands.lower.values().iter().zip(bands.upper.values()))
        .map(|(y, (lo, hi))| 0.5 * (pinball(y - lo, lower_tau) + pinball(y - hi, upper_tau)))
        .sum();
    Ok(score / n / mean)
}

/// Least-squares fit of `y = a x^(-b)` in log-log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
    /// Residual standard deviation of `ln y`, with `n - 2` degrees of freedom.
    pub log_residual_std: f64,
    pub r_squared: f64,
    /// Multiplicative factors of the 99% band, `exp(-z s)` and `exp(z s)`.
    pub lower_factor: f64,
    pub upper_factor: f64,
    pub n: usize,
    pub points: Vec<(f64, f64)>,
    /// Whether each point lies within the 99% band.
    pub inside: Vec<bool>,
}

impl PowerLawFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.a * x.powf(-self.b)
    }

    pub fn bounds(&self, x: f64) -> (f64, f64) {
        let y = self.predict(x);
        (y * self.lower_factor, y * self.upper_factor)
    }
}

pub fn power_law_fit(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    if points.len() < 3 {
        return Err(Error::domain(format!(
            "a power-law fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(p) = points.iter().find(|(x, y)| !(x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0)) {
        return Err(Error::domain(format!(
            "power-law points must be positive and finite, got ({}, {})",
            p.0, p.1
        )));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::RankDeficient("all x values are equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let resid: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - intercept - slope * x).collect();
    let ss_res: f64 = resid.iter().map(|r| r * r).sum();
    let ss_tot: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    let std = (ss_res / (n - 2.0)).sqrt();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let half_width = Z_99 * std;
    Ok(PowerLawFit {
        a: intercept.exp(),
        b: -slope,
        log_residual_std: std,
        r_squared,
        lower_factor: (-half_width).exp(),
        upper_factor: half_width.exp(),
        n: points.len(),
        points: points.to_vec(),
        inside: resid.iter().map(|r| r.abs() <= half_width * (1.0 + 1e-12)).collect(),
    })
}

/// Counts of alpha values in equal-width bins, one row per weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaHistogram {
    /// `bins + 1` edges.
    pub edges: Vec<f64>,
    pub rows: Vec<AlphaHistogramRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaHistogramRow {
    pub w: f64,
    pub counts: Vec<u64>,
    /// Values outside the binned range.
    pub below: u64,
    pub above: u64,
}

/// Bins `alphas` for each weight over `[lo, hi]`; the top edge is inclusive.
pub fn alpha_histogram(by_w: &[(f64, Vec<f64>)], lo: f64, hi: f64, bins: usize) -> Result<AlphaHistogram> {
    if bins == 0 || !(lo < hi) {
        return Err(Error::config(format!("histogram needs bins > 0 and lo < hi, got {bins} over [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let rows = by_w
        .iter()
        .map(|(w, alphas)| {
            let mut row = AlphaHistogramRow {
                w: *w,
                counts: vec![0; bins],
                below: 0,
                above: 0,
            };
            for &a in alphas {
                if a < lo {
                    row.below += 1;
                } else if a > hi {
                    row.above += 1;
                } else {
                    let k = (((a - lo) / width).floor() as usize).min(bins - 1);
                    row.counts[k] += 1;
                }
            }
            row
        })
        .collect();
    Ok(AlphaHistogram {
        edges: (0..=bins).map(|k| lo + k as f64 * width).collect(),
        rows,
    })
}

/// Share of non-domestic customers on a feeder, by count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProportionBucket {
    /// No non-domestic customers.
    None,
    /// Below 5%.
    Small,
    /// 5% to 10% inclusive.
    Medium,
    /// Above 10%.
    Large,
}

impl ProportionBucket {
    pub fn of(proportion: f64) -> Self {
        if proportion <= 0.0 {
            ProportionBucket::None
        } else if proportion < 0.05 {
            ProportionBucket::Small
        } else if proportion <= 0.10 {
            ProportionBucket::Medium
        } else {
            ProportionBucket::Large
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ProportionBucket::None => "none",
            ProportionBucket::Small => "small",
            ProportionBucket::Medium => "medium",
            ProportionBucket::Large => "large",
        }
    }
}

impl fmt::Display for ProportionBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn non_domestic_proportion(feeder: &Feeder) -> f64 {
    feeder.n_non_domestic() as f64 / feeder.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederSummary {
    pub feeder_id: String,
    pub daily_totals: Vec<f64>,
    /// Mean over all weeks of each slot of the week, Monday 00:00 first.
    pub mean_weekly_profile: Vec<f64>,
    pub non_domestic_proportion: f64,
    pub bucket: ProportionBucket,
}

pub fn feeder_summary(feeder: &Feeder) -> Result<FeederSummary> {
    let s = feeder.substation()?;
    if s.days() < 7 {
        return Err(Error::domain(format!(
            "feeder {}: a weekly profile needs at least 7 days, got {}",
            feeder.id,
            s.days()
        )));
    }
    let mut sums = vec![0.0; SLOTS_PER_WEEK];
    let mut counts = vec![0usize; SLOTS_PER_WEEK];
    for (t, v) in s.values().iter().enumerate() {
        let (date, h) = s.slot_datetime(t);
        let k = slot_of_week(date, h);
        sums[k] += v;
        counts[k] += 1;
    }
    let proportion = non_domestic_proportion(feeder);
    Ok(FeederSummary {
        feeder_id: feeder.id.clone(),
        daily_totals: s.daily_totals(),
        mean_weekly_profile: sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect(),
        non_domestic_proportion: proportion,
        bucket: ProportionBucket::of(proportion),
    })
}

/// Spearman rank correlation, with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::domain("spearman needs two equal-length samples of size >= 2"));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::DegenerateNormalizer("constant sample in spearman".into()));
    }
    Ok(cov / (vx * vy).sqrt())
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Customer;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn day0() -> NaiveDate {
        NaiveDate::from_ymd_opt(2015, 1, 5).unwrap()
    }

    fn series(v: Vec<f64>) -> HalfHourlySeries {
        HalfHourlySeries::new(day0(), v).unwrap()
    }

    #[test]
    fn rmae_closed_forms() {
        let a = HalfHourlySeries::constant(day0(), 2, 1.0).unwrap();
        assert_eq!(rmae(&a, &a).unwrap(), 0.0);
        let e = HalfHourlySeries::constant(day0(), 2, 1.1).unwrap();
        assert!((rmae(&a, &e).unwrap() - 0.1).abs() < 1e-12);
        let z = HalfHourlySeries::zeros(a.window());
        assert!(matches!(rmae(&z, &a), Err(Error::DegenerateNormalizer(_))));
    }

    #[test]
    fn crps_closed_form() {
        let a = HalfHourlySeries::constant(day0(), 3, 1.0).unwrap();
        let b = ConfidenceBands::new(
            HalfHourlySeries::constant(day0(), 3, 0.9).unwrap(),
            HalfHourlySeries::constant(day0(), 3, 1.1).unwrap(),
            "t",
        )
        .unwrap();
        assert!((normalized_crps(&a, &b).unwrap() - 0.01).abs() < 1e-12);
        let exact = ConfidenceBands::new(a.clone(), a.clone(), "t").unwrap();
        assert_eq!(normalized_crps(&a, &exact).unwrap(), 0.0);
    }

    fn vals(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                0.05 + (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    proptest! {
        #[test]
        fn rmae_matches_loop_and_is_scale_invariant(seed in any::<u64>(), c in 0.01..100.0f64) {
            let s = vals(seed, 96);
            let a = vals(seed ^ 0xdead, 96);
            let mut num = 0.0;
            let mut den = 0.0;
            for t in 0..96 {
                num += (s[t] - a[t]).abs();
                den += s[t];
            }
            let r = rmae(&series(s.clone()), &series(a.clone())).unwrap();
            prop_assert!((r - num / den).abs() < 1e-12);
            let scaled = rmae(&series(s).scaled(c), &series(a).scaled(c)).unwrap();
            prop_assert!((scaled - r).abs() < 1e-12 * r.max(1.0));
        }

        #[test]
        fn crps_matches_loop_and_is_scale_invariant(seed in any::<u64>(), c in 0.01..100.0f64) {
            let y = vals(seed, 96);
            let lo: Vec<f64> = vals(seed ^ 1, 96).iter().map(|v| v * 0.8).collect();
            let hi: Vec<f64> = lo.iter().zip(vals(seed ^ 2, 96)).map(|(l, d)| l + d).collect();
            let mut acc = 0.0;
            for t in 0..96 {
                let z1 = y[t] - lo[t];
                let z9 = y[t] - hi[t];
                let r1 = if z1 >= 0.0 { 0.1 * z1 } else { 0.9 * -z1 };
                let r9 = if z9 >= 0.0 { 0.9 * z9 } else { 0.1 * -z9 };
                acc += 0.5 * (r1 + r9);
            }
            let oracle = acc / 96.0 / (y.iter().sum::<f64>() / 96.0);
            let b = ConfidenceBands::new(series(lo.clone()), series(hi.clone()), "t").unwrap();
            let v = normalized_crps(&series(y.clone()), &b).unwrap();
            prop_assert!((v - oracle).abs() < 1e-12);
            let bs = ConfidenceBands::new(series(lo).scaled(c), series(hi).scaled(c), "t").unwrap();
            let vs = normalized_crps(&series(y).scaled(c), &bs).unwrap();
            prop_assert!((vs - v).abs() < 1e-10 * v.max(1.0));
        }

        #[test]
        fn power_law_is_equivariant_in_y(seed in any::<u64>(), c in 0.01..100.0f64) {
            let xs = vals(seed, 8);
            let ys = vals(seed ^ 3, 8);
            let pts: Vec<(f64, f64)> = xs.iter().zip(&ys).map(|(x, y)| (x * 50.0, *y)).collect();
            let scaled: Vec<(f64, f64)> = pts.iter().map(|(x, y)| (*x, y * c)).collect();
            let f = power_law_fit(&pts).unwrap();
            let g = power_law_fit(&scaled).unwrap();
            prop_assert!((g.a / f.a - c).abs() < 1e-9 * c);
            prop_assert!((g.b - f.b).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [1.0, 4.0, 9.0, 100.0].iter().map(|&x: &f64| (x, 2.0 * x.powf(-0.5))).collect();
        let f = power_law_fit(&pts).unwrap();
        assert!((f.a - 2.0).abs() < 1e-12 && (f.b - 0.5).abs() < 1e-12);
        assert!(f.log_residual_std < 1e-12);
        assert!(f.inside.iter().all(|&i| i));
    }

    #[test]
    fn power_law_needs_three_positive_points() {
        assert!(power_law_fit(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(power_law_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn point_mass_histogram() {
        let h = alpha_histogram(&[(0.0, vec![1.0; 17])], 0.8, 1.2, 20).unwrap();
        let row = &h.rows[0];
        assert_eq!(row.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(row.counts.iter().sum::<u64>(), 17);
        assert_eq!(h.edges.len(), 21);
        let top = alpha_histogram(&[(0.0, vec![1.2, 0.8])], 0.8, 1.2, 20).unwrap();
        assert_eq!((top.rows[0].counts[0], top.rows[0].counts[19]), (1, 1));
    }

    #[test]
    fn buckets_follow_thresholds() {
        assert_eq!(ProportionBucket::of(0.0), ProportionBucket::None);
        assert_eq!(ProportionBucket::of(0.049), ProportionBucket::Small);
        assert_eq!(ProportionBucket::of(2.0 / 21.0), ProportionBucket::Medium);
        assert_eq!(ProportionBucket::of(0.1), ProportionBucket::Medium);
        assert_eq!(ProportionBucket::of(0.11), ProportionBucket::Large);
    }

    #[test]
    fn summary_of_constant_series() {
        let mut customers: Vec<Customer> = (0..19)
            .map(|i| Customer::new(format!("d{i}"), "PC1-A".parse().unwrap(), Some(10.0)).unwrap())
            .collect();
        customers.push(Customer::new("n1", "ND:school".parse().unwrap(), Some(50.0)).unwrap());
        customers.push(Customer::new("n2", "ND:office".parse().unwrap(), Some(50.0)).unwrap());
        let s = HalfHourlySeries::constant(day0(), 14, 2.0).unwrap();
        let f = Feeder::new("f", customers, Some(s)).unwrap();
        let sum = feeder_summary(&f).unwrap();
        assert!(sum.daily_totals.iter().all(|&d| (d - 96.0).abs() < 1e-12));
        assert!(sum.mean_weekly_profile.iter().all(|&v| v == 2.0));
        assert_eq!(sum.bucket, ProportionBucket::Medium);
    }

    #[test]
    fn spearman_of_monotone_and_tied_data() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 35.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
    }
}

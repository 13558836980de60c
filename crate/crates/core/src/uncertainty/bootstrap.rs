//! Customer bootstrap bands.
//!
//! Each resample replaces the feeder's domestic customers by profiles drawn
//! with replacement from the monitored pool of the same profile class, and
//! scales each non-domestic customer's standard profile by a random factor
//! around its mean daily demand. Slot-wise empirical quantiles over the
//! resampled aggregates give the bands.
//!
//! Resample `r` draws from its own stream, domestic profiles first, so the
//! domestic draws do not depend on the scaling distribution.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ConfidenceBands;
use crate::error::{Error, Result};
use crate::model::{CustomerClass, Feeder, MonitoredPool, ProfileClass, ALPHA_MAX, ALPHA_MIN};
use crate::rng;
use crate::series::{Window, SLOTS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingDist {
    /// `Uniform[alpha_min, alpha_max] * U`, by default `[0.8, 1.2]`.
    Uniform,
    /// `Normal(U, 20 U / 196)`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub n_resamples: usize,
    pub scaling: ScalingDist,
    pub lower_quantile: f64,
    pub upper_quantile: f64,
    pub seed: u64,
    /// Draw from solar-equipped monitored profiles as well.
    pub include_solar: bool,
    /// Range of the uniform scaling factor.
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            n_resamples: 1500,
            scaling: ScalingDist::Uniform,
            lower_quantile: 0.1,
            upper_quantile: 0.9,
            seed: 0,
            include_solar: true,
            alpha_min: ALPHA_MIN,
            alpha_max: ALPHA_MAX,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_resamples == 0 {
            return Err(Error::config("n_resamples must be at least 1"));
        }
        for q in [self.lower_quantile, self.upper_quantile] {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::config(format!("quantile {q} must lie strictly within (0, 1)")));
            }
        }
        if self.lower_quantile > self.upper_quantile {
            return Err(Error::config("lower_quantile exceeds upper_quantile"));
        }
        if !(self.alpha_min.is_finite() && self.alpha_min <= self.alpha_max && self.alpha_max.is_finite()) {
            return Err(Error::config("alpha_min must not exceed alpha_max"));
        }
        Ok(())
    }

    pub fn method_tag(&self) -> &'static str {
        match self.scaling {
            ScalingDist::Uniform => "bootstrap-uniform",
            ScalingDist::Gaussian => "bootstrap-gaussian",
        }
    }
}

/// Standard deviation of the Gaussian non-domestic scale for mean daily demand `u`.
pub fn gaussian_sigma(u: f64) -> f64 {
    20.0 * u / 196.0
}

/// Type-7 empirical quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bootstrap bands for `feeder` over `window`.
pub fn bootstrap_bands(
    feeder: &Feeder,
    pool: &MonitoredPool,
    window: Window,
    cfg: &BootstrapConfig,
) -> Result<ConfidenceBands> {
    cfg.validate()?;
    let pc1 = pool.class_members(ProfileClass::Pc1, cfg.include_solar);
    let pc2 = pool.class_members(ProfileClass::Pc2, cfg.include_solar);
    let mut domestic_classes = Vec::new();
    let mut non_domestic = Vec::new();
    for c in &feeder.customers {
        match &c.class {
            CustomerClass::Domestic { profile_class, .. } => {
                let members = match profile_class {
                    ProfileClass::Pc1 => &pc1,
                    ProfileClass::Pc2 => &pc2,
                };
                if members.is_empty() {
                    return Err(Error::EmptyGroup(format!(
                        "no monitored {profile_class:?} profiles to resample for customer {}",
                        c.id
                    )));
                }
                domestic_classes.push(members.as_slice());
            }
            CustomerClass::NonDomestic { .. } => {
                let profile = pool.candidates(&c.group_key())?[0];
                non_domestic.push((profile, c.mean_daily()?));
            }
        }
    }

    // draws[r] = (domestic profile indices, non-domestic scales in kWh/day)
    let draws = (0..cfg.n_resamples)
        .map(|r| {
            let mut rng = rng::stream(cfg.seed, r as u64);
            let profiles: Vec<usize> = domestic_classes
                .iter()
                .map(|m| m[rng.random_range(0..m.len())])
                .collect();
            let scales = non_domestic
                .iter()
                .map(|&(_, u)| match cfg.scaling {
                    ScalingDist::Uniform => Ok(rng.random_range(cfg.alpha_min..=cfg.alpha_max) * u),
                    ScalingDist::Gaussian => Normal::new(u, gaussian_sigma(u))
                        .map(|n| n.sample(&mut rng))
                        .map_err(|e| Error::domain(format!("gaussian scale for U = {u}: {e}"))),
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((profiles, scales))
        })
        .collect::<Result<Vec<_>>>()?;

    let views = pool
        .profiles()
        .iter()
        .map(|p| p.series.view(window))
        .collect::<Result<Vec<_>>>()?;
    let allows_negative = draws
        .iter()
        .flat_map(|d| d.0.iter())
        .chain(non_domestic.iter().map(|n| &n.0))
        .any(|&k| pool.get(k).series.allows_negative());

    let days: Vec<(Vec<f64>, Vec<f64>)> = (0..window.days)
        .into_par_iter()
        .map(|day| {
            let range = day * SLOTS_PER_DAY..(day + 1) * SLOTS_PER_DAY;
            let mut agg = vec![[0.0f64; SLOTS_PER_DAY]; cfg.n_resamples];
            for (a, (profiles, scales)) in agg.iter_mut().zip(&draws) {
                for &k in profiles {
                    for (x, v) in a.iter_mut().zip(&views[k][range.clone()]) {
                        *x += v;
                    }
                }
                for (&(k, _), s) in non_domestic.iter().zip(scales) {
                    for (x, v) in a.iter_mut().zip(&views[k][range.clone()]) {
                        *x += s * v;
                    }
                }
            }
            let mut lower = Vec::with_capacity(SLOTS_PER_DAY);
            let mut upper = Vec::with_capacity(SLOTS_PER_DAY);
            let mut column = vec![0.0; cfg.n_resamples];
            for h in 0..SLOTS_PER_DAY {
                for (c, a) in column.iter_mut().zip(&agg) {
                    *c = a[h];
                }
                column.sort_by(f64::total_cmp);
                lower.push(quantile_sorted(&column, cfg.lower_quantile));
                upper.push(quantile_sorted(&column, cfg.upper_quantile));
            }
            (lower, upper)
        })
        .collect();
    let (lower, upper): (Vec<_>, Vec<_>) = days.into_iter().unzip();
    ConfidenceBands::repaired(
        window.start,
        lower.concat(),
        upper.concat(),
        allows_negative,
        cfg.method_tag(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_sigma_for_ten() {
        assert!((gaussian_sigma(10.0) - 200.0 / 196.0).abs() < 1e-12);
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile_sorted(&v, 0.5), 3.0);
        assert!((quantile_sorted(&v, 0.1) - 1.4).abs() < 1e-12);
        assert_eq!(quantile_sorted(&[7.0], 0.9), 7.0);
    }
}

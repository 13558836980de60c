//! The buddying cost: a weighted sum of the substation fit and the mean-daily-demand fit.
//!
//! ```text
//! F = (1-w) * sum_h |a(h) - s(h)| / S
//!   + w * ( sum_dom |U_j - Û_k(j)| / D + sum_nondom U_j |1 - alpha_j| / D )
//! ```
//!
//! with `S = sum_h s(h)` over the training window and `D = sum_j U_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BuddyAssignment, Feeder, MonitoredPool};
use crate::series::Window;

/// The cost of one assignment, split into its terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub total: f64,
    /// `sum |a - s| / S`; zero (and unused) when `w = 1`.
    pub substation_term: f64,
    pub domestic_term: f64,
    pub non_domestic_term: f64,
    /// `S`, absent when the substation term is skipped.
    pub substation_total: Option<f64>,
    /// `D`.
    pub demand_total: f64,
    pub w: f64,
}

/// Precomputed data for evaluating many assignments of one feeder.
#[derive(Debug, Clone)]
pub struct CostModel<'a> {
    pool: &'a MonitoredPool,
    w: f64,
    window: Window,
    substation: Option<&'a [f64]>,
    substation_total: Option<f64>,
    demand_total: f64,
    /// `U_j` per customer.
    mean_daily: Vec<f64>,
    domestic: Vec<bool>,
    /// Pool profiles restricted to the window, indexed like the pool.
    views: Vec<&'a [f64]>,
}

impl<'a> CostModel<'a> {
    /// `window` selects the training slots; `Û` comes from the pool's cached means.
    pub fn new(feeder: &'a Feeder, pool: &'a MonitoredPool, w: f64, window: Window) -> Result<Self> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::config(format!("weight w = {w} outside [0, 1]")));
        }
        let mean_daily = feeder
            .customers
            .iter()
            .map(|c| c.mean_daily())
            .collect::<Result<Vec<_>>>()?;
        let demand_total: f64 = mean_daily.iter().sum();
        if demand_total <= 0.0 {
            return Err(Error::DegenerateNormalizer(format!(
                "feeder {}: D = sum of mean daily demands is {demand_total}",
                feeder.id
            )));
        }
        let (substation, substation_total) = if w < 1.0 {
            let s = feeder.substation()?.view(window)?;
            let total: f64 = s.iter().sum();
            if total == 0.0 {
                return Err(Error::DegenerateNormalizer(format!(
                    "feeder {}: S = total substation demand is zero over the training window",
                    feeder.id
                )));
            }
            (Some(s), Some(total))
        } else {
            (None, None)
        };
        let views = pool
            .profiles()
            .iter()
            .map(|p| p.series.view(window))
            .collect::<Result<Vec<_>>>()?;
        Ok(CostModel {
            pool,
            w,
            window,
            substation,
            substation_total,
            demand_total,
            mean_daily,
            domestic: feeder.customers.iter().map(|c| c.is_domestic()).collect(),
            views,
        })
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn n_customers(&self) -> usize {
        self.domestic.len()
    }

    pub fn is_domestic(&self, j: usize) -> bool {
        self.domestic[j]
    }

    pub fn mean_daily(&self, j: usize) -> f64 {
        self.mean_daily[j]
    }

    pub fn demand_total(&self) -> f64 {
        self.demand_total
    }

    pub fn substation_total(&self) -> Option<f64> {
        self.substation_total
    }

    pub(crate) fn substation(&self) -> Option<&'a [f64]> {
        self.substation
    }

    pub(crate) fn view(&self, profile: usize) -> &'a [f64] {
        self.views[profile]
    }

    /// Weight applied to customer `j`'s buddy series in `a(h)`.
    pub(crate) fn series_weight(&self, j: usize, alpha: f64) -> f64 {
        if self.domestic[j] {
            1.0
        } else {
            alpha * self.mean_daily[j]
        }
    }

    /// Evaluates a validated assignment.
    pub fn evaluate(&self, assignment: &BuddyAssignment) -> CostBreakdown {
        let profiles: Vec<usize> = assignment.buddies.iter().map(|b| b.profile).collect();
        let alphas: Vec<f64> = assignment.buddies.iter().map(|b| b.alpha.unwrap_or(1.0)).collect();
        self.evaluate_parts(&profiles, &alphas)
    }

    /// Evaluates per-customer profile indices and alphas (alpha ignored for domestic customers).
    pub(crate) fn evaluate_parts(&self, profiles: &[usize], alphas: &[f64]) -> CostBreakdown {
        let substation_term = match self.substation {
            Some(s) => {
                let mut agg = vec![0.0; s.len()];
                for (j, (&k, &alpha)) in profiles.iter().zip(alphas).enumerate() {
                    let weight = self.series_weight(j, alpha);
                    for (a, p) in agg.iter_mut().zip(self.views[k]) {
                        *a += weight * p;
                    }
                }
                let abs: f64 = agg.iter().zip(s).map(|(a, s)| (a - s).abs()).sum();
                abs / self.substation_total.expect("set with substation")
            }
            None => 0.0,
        };
        let (domestic_term, non_domestic_term) = self.demand_terms(profiles, alphas);
        self.combine(substation_term, domestic_term, non_domestic_term)
    }

    pub(crate) fn demand_terms(&self, profiles: &[usize], alphas: &[f64]) -> (f64, f64) {
        let mut dom = 0.0;
        let mut nondom = 0.0;
        for (j, (&k, &alpha)) in profiles.iter().zip(alphas).enumerate() {
            if self.domestic[j] {
                dom += (self.mean_daily[j] - self.pool.get(k).mean_daily).abs();
            } else {
                nondom += self.mean_daily[j] * (1.0 - alpha).abs();
            }
        }
        (dom / self.demand_total, nondom / self.demand_total)
    }

    pub(crate) fn combine(&self, substation_term: f64, domestic_term: f64, non_domestic_term: f64) -> CostBreakdown {
        let w = self.w;
        let total = if w < 1.0 {
            (1.0 - w) * substation_term + w * (domestic_term + non_domestic_term)
        } else {
            domestic_term + non_domestic_term
        };
        CostBreakdown {
            total,
            substation_term,
            domestic_term,
            non_domestic_term,
            substation_total: self.substation_total,
            demand_total: self.demand_total,
            w,
        }
    }
}

/// Cost of `assignment` for `feeder` with weight `w` over the training `window`.
pub fn cost(
    feeder: &Feeder,
    assignment: &BuddyAssignment,
    pool: &MonitoredPool,
    w: f64,
    window: Window,
) -> Result<CostBreakdown> {
    assignment.validate(feeder, pool)?;
    Ok(CostModel::new(feeder, pool, w, window)?.evaluate(assignment))
}

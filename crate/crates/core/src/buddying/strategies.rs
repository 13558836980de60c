//! Three ways of scaling the standard profile of a lone non-domestic customer.

use serde::{Deserialize, Serialize};

use super::ga::{ga_buddy, GaConfig};
use crate::error::{Error, Result};
use crate::model::{Buddy, BuddyAssignment, Feeder, MonitoredPool};
use crate::series::Window;

/// An assignment together with its effective scaling `alpha * U` in kWh/day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledAssignment {
    pub assignment: BuddyAssignment,
    pub effective_daily_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingStrategies {
    pub feeder_id: String,
    /// Scaled to the measured mean daily demand.
    pub actual: ScaledAssignment,
    /// Scaled to the quarterly-meter-reading estimate.
    pub estimated: ScaledAssignment,
    /// Scaling chosen by the GA against the substation series with `w = 0`.
    pub optimal: ScaledAssignment,
}

/// Upper bound on the free alpha used by the optimal strategy.
pub const FREE_ALPHA_MAX: f64 = 1e4;

/// Mean daily demand of the feeder's substation series over `window`.
pub fn measured_daily(feeder: &Feeder, window: Window) -> Result<f64> {
    let s = feeder.substation()?.view(window)?;
    Ok(s.iter().sum::<f64>() / window.days as f64)
}

/// Compares actual, estimated and optimal scalings on a feeder holding a single
/// non-domestic customer. `truth_daily` is the measured mean daily demand.
///
/// The optimal strategy reuses `ga` but forces `w = 0` and lets alpha range over
/// `[0, FREE_ALPHA_MAX]`, so the GA may correct a badly wrong meter reading.
pub fn scale_strategies(
    feeder: &Feeder,
    pool: &MonitoredPool,
    window: Window,
    truth_daily: f64,
    ga: &GaConfig,
) -> Result<ScalingStrategies> {
    if feeder.len() != 1 || feeder.n_non_domestic() != 1 {
        return Err(Error::Unsupported(format!(
            "feeder {} has {} customers ({} non-domestic); scaling strategies need exactly one non-domestic customer",
            feeder.id,
            feeder.len(),
            feeder.n_non_domestic()
        )));
    }
    if !(truth_daily.is_finite() && truth_daily > 0.0) {
        return Err(Error::domain(format!("measured mean daily demand {truth_daily} must be positive")));
    }
    let customer = &feeder.customers[0];
    let u = customer.mean_daily()?;
    let profile = pool.candidates(&customer.group_key())?[0];
    let fixed = |alpha: f64| ScaledAssignment {
        assignment: BuddyAssignment::new(vec![Buddy {
            profile,
            alpha: Some(alpha),
        }]),
        effective_daily_kwh: alpha * u,
    };

    let cfg = GaConfig {
        w: 0.0,
        alpha_min: 0.0,
        alpha_max: FREE_ALPHA_MAX,
        fix_alpha: false,
        ..ga.clone()
    };
    let outcome = ga_buddy(feeder, pool, window, &cfg)?;
    let alpha = outcome.assignment.buddies[0].alpha.expect("non-domestic alpha");
    Ok(ScalingStrategies {
        feeder_id: feeder.id.clone(),
        actual: fixed(truth_daily / u),
        estimated: fixed(1.0),
        optimal: ScaledAssignment {
            assignment: outcome.assignment,
            effective_daily_kwh: alpha * u,
        },
    })
}

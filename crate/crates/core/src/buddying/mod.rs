//! Assigning monitored profiles to the customers of a feeder.

pub mod cost;
pub mod ga;
pub mod simple;
pub mod strategies;

pub use cost::{cost, CostBreakdown, CostModel};
pub use ga::{ga_buddy, GaConfig, GaOutcome};
pub use simple::simple_buddy;
pub use strategies::{measured_daily, scale_strategies, ScaledAssignment, ScalingStrategies, FREE_ALPHA_MAX};

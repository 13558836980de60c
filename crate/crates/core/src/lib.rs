//! Populating low-voltage feeders with monitored demand profiles ("buddying"),
//! estimating feeder confidence bands, and scoring both.
//!
//! The crate is organised by stage:
//!
//! * [`series`] and [`model`]: half-hourly series, customers, pools, feeders, assignments;
//! * [`catalogue`] and [`ingestion`]: standard non-domestic shapes, file formats, cleaning;
//! * [`synthgen`]: seeded synthetic networks with known ground truth;
//! * [`buddying`]: the nearest-demand matcher, the cost function and the genetic optimiser;
//! * [`uncertainty`]: bootstrap and quantile-regression confidence bands;
//! * [`evaluation`]: RMAE, normalised CRPS, power-law fits and summaries.

pub mod buddying;
pub mod catalogue;
pub mod error;
pub mod evaluation;
pub mod ingestion;
pub mod model;
pub mod rng;
pub mod series;
pub mod synthgen;
pub mod uncertainty;

pub use error::{Error, Result};
pub use model::{
    aggregate_assignment, Buddy, BuddyAssignment, Customer, CustomerClass, Feeder, GroupKey,
    MonitoredPool, MonitoredProfile,
};
pub use series::{mean_daily_demand, HalfHourlySeries, Window};

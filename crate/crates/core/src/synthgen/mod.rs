//! Seeded synthetic networks with known ground truth.
//!
//! A scenario is a monitored pool (plus the annualised standard profiles of
//! the catalogue) and a set of feeders. Each feeder's substation series is
//! the sum of its customers' true series, optionally with measurement noise,
//! and each customer's meter reading is its true mean daily demand distorted
//! by the configured error model.
//!
//! A non-domestic customer's true series is its type's normalised standard
//! profile times `alpha_true * u_base`, where `u_base` is drawn from the
//! configured demand distribution and `alpha_true` from the configured range.
//! Meter-reading errors multiply `u_base`, so with exact readings the truth
//! assignment (`alpha = alpha_true`) reproduces the substation series.
//!
//! Every draw comes from a ChaCha20 stream derived from the scenario seed and
//! a fixed label, so each profile and feeder is reproducible on its own.

mod shapes;

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalogue::{builtin_catalogue, StandardProfile};
use crate::error::{Error, Result};
use crate::ingestion::files::{self, FeederTopology, QmrRecord};
use crate::ingestion::{
    build_pool, clean_series, CleaningPolicy, HolidayCalendar, RawSeries, CALENDAR_FILE, CATALOGUE_FILE,
    PROFILES_FILE, QMR_FILE, STANDARD_PROFILE_PREFIX, TOPOLOGY_FILE,
};
use crate::model::{
    Buddy, BuddyAssignment, Customer, CustomerClass, Feeder, GroupKey, MonitoredPool, MonitoredProfile,
    ProfileClass, TaxBand,
};
use crate::rng::{self, derive_seed, StreamRng};
use crate::series::{mean_daily_demand, HalfHourlySeries, Window};

use shapes::noise_factor;

pub const SUBSTATION_DIR: &str = "substation";
pub const TRUTH_FILE: &str = "truth/truth.json";
pub const SCENARIO_FILE: &str = "scenario.json";

/// Target statistics of a mean-daily-demand distribution, kWh/day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandStats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl DemandStats {
    /// Profile class 1, non-solar.
    pub const PC1: DemandStats = DemandStats {
        mean: 11.245,
        std: 6.427,
        min: 0.761,
        max: 35.775,
    };
    /// Profile class 2, non-solar.
    pub const PC2: DemandStats = DemandStats {
        mean: 16.015,
        std: 11.678,
        min: 4.800,
        max: 46.110,
    };

    pub fn validate(&self, name: &str) -> Result<()> {
        let DemandStats { mean, std, min, max } = *self;
        if !(0.0 < min && min < mean && mean < max && std > 0.0) {
            return Err(Error::config(format!(
                "{name}: need 0 < min < mean < max and std > 0, got {self:?}"
            )));
        }
        // largest standard deviation any distribution on [min, max] with this mean can have
        let limit = ((mean - min) * (max - mean)).sqrt();
        if std > limit {
            return Err(Error::config(format!(
                "{name}: std {std} is infeasible on [{min}, {max}] with mean {mean} (at most {limit:.4})"
            )));
        }
        Ok(())
    }

    /// Log-scale parameters `(mu, sigma)` of a lognormal whose restriction to
    /// `[min, max]` has this mean and std. Falls back to the untruncated
    /// moments when no lognormal reaches the target after truncation.
    pub fn lognormal_params(&self) -> (f64, f64) {
        let params = |m: f64, sd: f64| {
            let s2 = (1.0 + (sd / m).powi(2)).ln();
            (m.ln() - 0.5 * s2, s2.sqrt())
        };
        let (mut m, mut sd) = (self.mean, self.std);
        for _ in 0..500 {
            let (mu, sigma) = params(m, sd);
            let Some((tm, ts)) = truncated_lognormal_moments(mu, sigma, self.min, self.max) else {
                break;
            };
            if (tm - self.mean).abs() <= 1e-10 * self.mean && (ts - self.std).abs() <= 1e-10 * self.std {
                return (mu, sigma);
            }
            m = (m + self.mean - tm).max(1e-9);
            sd *= self.std / ts;
            if !(m.is_finite() && sd.is_finite()) {
                break;
            }
        }
        params(self.mean, self.std)
    }

    /// Lognormal draw rejected until it falls within `[min, max]`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<f64> {
        let (mu, sigma) = self.lognormal_params();
        for _ in 0..10_000 {
            let v = (mu + sigma * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng)).exp();
            if (self.min..=self.max).contains(&v) {
                return Ok(v);
            }
        }
        Err(Error::config(format!("could not draw a demand within [{}, {}]", self.min, self.max)))
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Mean and std of `exp(N(mu, sigma^2))` conditioned on `[a, b]`.
fn truncated_lognormal_moments(mu: f64, sigma: f64, a: f64, b: f64) -> Option<(f64, f64)> {
    let lo = (a.ln() - mu) / sigma;
    let hi = (b.ln() - mu) / sigma;
    let mass = |k: f64| std_normal_cdf(hi - k * sigma) - std_normal_cdf(lo - k * sigma);
    let z = mass(0.0);
    if !(z > 0.0) {
        return None;
    }
    let m1 = (mu + 0.5 * sigma * sigma).exp() * mass(1.0) / z;
    let m2 = (2.0 * mu + 2.0 * sigma * sigma).exp() * mass(2.0) / z;
    let var = m2 - m1 * m1;
    (m1.is_finite() && var.is_finite() && var > 0.0).then(|| (m1, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoolConfig {
    pub pc1: usize,
    pub pc2: usize,
    /// Solar-equipped profile class 1 profiles.
    pub solar: usize,
    pub pc1_demand: DemandStats,
    pub pc2_demand: DemandStats,
    pub solar_demand: DemandStats,
    /// Mean solar generation as a fraction of consumption.
    pub solar_fraction: f64,
    /// Relative frequency of council-tax bands A to H.
    pub band_weights: [f64; 8],
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            pc1: 199,
            pc2: 15,
            solar: 28,
            pc1_demand: DemandStats::PC1,
            pc2_demand: DemandStats::PC2,
            solar_demand: DemandStats::PC1,
            solar_fraction: 0.35,
            band_weights: [0.19, 0.20, 0.22, 0.16, 0.10, 0.07, 0.05, 0.01],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeederConfig {
    pub count: usize,
    /// Customers per feeder, drawn log-uniformly.
    pub customers_min: usize,
    pub customers_max: usize,
    /// Non-domestic customers per feeder, drawn uniformly.
    pub non_domestic_min: usize,
    pub non_domestic_max: usize,
    /// Catalogue types to draw from; empty means all.
    pub non_domestic_types: Vec<String>,
    pub non_domestic_demand: DemandStats,
    pub alpha_true_min: f64,
    pub alpha_true_max: f64,
}

impl Default for FeederConfig {
    fn default() -> Self {
        FeederConfig {
            count: 10,
            customers_min: 5,
            customers_max: 60,
            non_domestic_min: 0,
            non_domestic_max: 2,
            non_domestic_types: Vec::new(),
            non_domestic_demand: DemandStats {
                mean: 120.0,
                std: 90.0,
                min: 10.0,
                max: 1500.0,
            },
            alpha_true_min: 0.8,
            alpha_true_max: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Log-scale std of per-slot multiplicative noise.
    pub half_hourly_sigma: f64,
    /// Log-scale std of per-day multiplicative noise.
    pub daily_sigma: f64,
    /// Relative winter excess of domestic demand.
    pub seasonal_amplitude: f64,
    /// Log-scale std of daily deviations of non-domestic customers from their standard shape.
    pub non_domestic_sigma: f64,
    /// Log-scale std of per-slot substation metering noise.
    pub measurement_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            half_hourly_sigma: 0.25,
            daily_sigma: 0.12,
            seasonal_amplitude: 0.2,
            non_domestic_sigma: 0.1,
            measurement_sigma: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        NoiseConfig {
            half_hourly_sigma: 0.0,
            daily_sigma: 0.0,
            seasonal_amplitude: 0.0,
            non_domestic_sigma: 0.0,
            measurement_sigma: 0.0,
        }
    }
}

/// Meter-reading error: a mean-one lognormal factor for everyone, times a gross
/// factor for a random subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QmrErrorModel {
    pub sigma: f64,
    pub gross_probability_domestic: f64,
    pub gross_probability_non_domestic: f64,
    /// Fixed gross factor; when absent the factor is uniform on `[gross_factor_min, gross_factor_max]`.
    pub gross_factor: Option<f64>,
    pub gross_factor_min: f64,
    pub gross_factor_max: f64,
    /// Probability that a reading is missing altogether.
    pub missing_probability: f64,
}

impl Default for QmrErrorModel {
    fn default() -> Self {
        QmrErrorModel {
            sigma: 0.1,
            gross_probability_domestic: 0.0,
            gross_probability_non_domestic: 0.0,
            gross_factor: None,
            gross_factor_min: 0.005,
            gross_factor_max: 0.05,
            missing_probability: 0.0,
        }
    }
}

impl QmrErrorModel {
    pub fn exact() -> Self {
        QmrErrorModel {
            sigma: 0.0,
            ..QmrErrorModel::default()
        }
    }
}

/// Where customers' true domestic profiles come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruthSource {
    /// Reuse a monitored profile, so the truth is itself a candidate buddy.
    Pool,
    /// Generate a fresh profile of the same class, unseen by the buddying.
    HeldOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub start_date: NaiveDate,
    pub days: usize,
    pub pool: PoolConfig,
    pub feeders: FeederConfig,
    pub noise: NoiseConfig,
    pub qmr: QmrErrorModel,
    pub truth_source: TruthSource,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 1,
            start_date: NaiveDate::from_ymd_opt(2014, 3, 20).expect("valid date"),
            days: 552,
            pool: PoolConfig::default(),
            feeders: FeederConfig::default(),
            noise: NoiseConfig::default(),
            qmr: QmrErrorModel::default(),
            truth_source: TruthSource::Pool,
        }
    }
}

impl ScenarioConfig {
    pub fn window(&self) -> Window {
        Window::new(self.start_date, self.days)
    }

    pub fn validate(&self) -> Result<()> {
        if self.days < 14 {
            return Err(Error::config(format!("days = {} is below the 14-day minimum", self.days)));
        }
        let p = &self.pool;
        if p.pc1 + p.pc2 + p.solar == 0 {
            return Err(Error::config("the pool needs at least one profile"));
        }
        p.pc1_demand.validate("pool.pc1_demand")?;
        p.pc2_demand.validate("pool.pc2_demand")?;
        p.solar_demand.validate("pool.solar_demand")?;
        if !(0.0..1.0).contains(&p.solar_fraction) {
            return Err(Error::config("pool.solar_fraction must lie in [0, 1)"));
        }
        if p.band_weights.iter().any(|w| !(*w >= 0.0)) || p.band_weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::config("pool.band_weights must be non-negative with a positive sum"));
        }
        let f = &self.feeders;
        if f.count == 0 || f.customers_min == 0 || f.customers_min > f.customers_max {
            return Err(Error::config("feeders: need count >= 1 and 1 <= customers_min <= customers_max"));
        }
        if f.non_domestic_min > f.non_domestic_max || f.non_domestic_min > f.customers_max {
            return Err(Error::config("feeders: non_domestic_min must not exceed non_domestic_max or customers_max"));
        }
        if f.non_domestic_min == f.customers_max && p.pc1 + p.pc2 + p.solar == 0 {
            return Err(Error::config("feeders: no domestic profiles to draw from"));
        }
        if f.non_domestic_max > 0 {
            f.non_domestic_demand.validate("feeders.non_domestic_demand")?;
        }
        if !(f.alpha_true_min > 0.0 && f.alpha_true_min <= f.alpha_true_max && f.alpha_true_max.is_finite()) {
            return Err(Error::config("feeders: need 0 < alpha_true_min <= alpha_true_max"));
        }
        let n = &self.noise;
        for (name, v) in [
            ("half_hourly_sigma", n.half_hourly_sigma),
            ("daily_sigma", n.daily_sigma),
            ("non_domestic_sigma", n.non_domestic_sigma),
            ("measurement_sigma", n.measurement_sigma),
            ("qmr.sigma", self.qmr.sigma),
        ] {
            if !(0.0..=2.0).contains(&v) {
                return Err(Error::config(format!("{name} = {v} outside [0, 2]")));
            }
        }
        if !(0.0..0.9).contains(&n.seasonal_amplitude) {
            return Err(Error::config("noise.seasonal_amplitude must lie in [0, 0.9)"));
        }
        let q = &self.qmr;
        for (name, v) in [
            ("qmr.gross_probability_domestic", q.gross_probability_domestic),
            ("qmr.gross_probability_non_domestic", q.gross_probability_non_domestic),
            ("qmr.missing_probability", q.missing_probability),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{name} = {v} outside [0, 1]")));
            }
        }
        let factor_ok = match q.gross_factor {
            Some(g) => g > 0.0 && g.is_finite(),
            None => 0.0 < q.gross_factor_min && q.gross_factor_min <= q.gross_factor_max,
        };
        if !factor_ok {
            return Err(Error::config("qmr gross factor must be positive"));
        }
        Ok(())
    }
}

/// The pool together with the data used to build its standard profiles.
#[derive(Debug, Clone)]
pub struct GeneratedPool {
    /// Monitored profiles followed by one annualised standard profile per catalogue type.
    pub pool: MonitoredPool,
    /// Number of monitored profiles at the front of `pool`.
    pub monitored: usize,
    pub catalogue: Vec<StandardProfile>,
    pub calendar: HolidayCalendar,
}

fn pick_band<R: Rng>(rng: &mut R, weights: &[f64; 8]) -> TaxBand {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random_range(0.0..total);
    for (w, b) in weights.iter().zip(TaxBand::ALL) {
        if x < *w {
            return b;
        }
        x -= w;
    }
    TaxBand::ALL[weights.iter().rposition(|w| *w > 0.0).expect("positive weight")]
}

/// Generates the monitored pool and appends the catalogue's standard profiles.
pub fn generate_pool(cfg: &ScenarioConfig) -> Result<GeneratedPool> {
    cfg.validate()?;
    let window = cfg.window();
    let p = &cfg.pool;
    let seed = derive_seed(cfg.seed, "pool");
    let specs: Vec<(ProfileClass, bool)> = std::iter::repeat_n((ProfileClass::Pc1, false), p.pc1)
        .chain(std::iter::repeat_n((ProfileClass::Pc2, false), p.pc2))
        .chain(std::iter::repeat_n((ProfileClass::Pc1, true), p.solar))
        .collect();
    let monitored = specs
        .par_iter()
        .enumerate()
        .map(|(i, &(class, solar))| {
            let mut rng = rng::stream(seed, i as u64);
            let band = pick_band(&mut rng, &p.band_weights);
            let stats = match (class, solar) {
                (_, true) => &p.solar_demand,
                (ProfileClass::Pc1, false) => &p.pc1_demand,
                (ProfileClass::Pc2, false) => &p.pc2_demand,
            };
            let mean = stats.sample(&mut rng)?;
            let fraction = if solar { p.solar_fraction } else { 0.0 };
            let raw = shapes::domestic_series(&mut rng, window, class, mean, fraction, &cfg.noise)?;
            let (series, _) = clean_series(&RawSeries::from_series(&raw), &CleaningPolicy::default())?;
            MonitoredProfile::new(
                format!("m{:04}", i + 1),
                CustomerClass::domestic(class, band, solar).group_key(),
                series,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let n = monitored.len();
    let catalogue = builtin_catalogue();
    let calendar = HolidayCalendar::england_like(window);
    let pool = build_pool(monitored, &catalogue, &calendar)?;
    Ok(GeneratedPool {
        pool,
        monitored: n,
        catalogue,
        calendar,
    })
}

/// Ground truth for one customer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerTruth {
    pub customer_id: String,
    /// Mean daily demand of the true series, kWh/day.
    pub true_mean_daily: f64,
    /// Pool id of the true profile; absent for held-out domestic truths.
    pub profile_id: Option<String>,
    /// `alpha_true` for non-domestic customers.
    pub alpha: Option<f64>,
    /// `u_base` for non-domestic customers.
    pub base_mean_daily: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederTruth {
    pub feeder_id: String,
    pub customers: Vec<CustomerTruth>,
    /// Noise-free sum of the true series.
    #[serde(skip)]
    pub aggregate: Option<HalfHourlySeries>,
}

impl FeederTruth {
    /// The truth as a buddy assignment, when every true profile is in the pool.
    pub fn assignment(&self, pool: &MonitoredPool) -> Option<BuddyAssignment> {
        self.customers
            .iter()
            .map(|c| {
                let id = c.profile_id.as_ref()?;
                Some(Buddy {
                    profile: pool.index_of(id)?,
                    alpha: c.alpha,
                })
            })
            .collect::<Option<Vec<_>>>()
            .map(BuddyAssignment::new)
    }

    /// Effective true scaling `alpha_true * u_base` of each non-domestic customer.
    pub fn non_domestic_scalings(&self) -> Vec<f64> {
        self.customers
            .iter()
            .filter_map(|c| Some(c.alpha? * c.base_mean_daily?))
            .collect()
    }
}

fn qmr_reading<R: Rng>(rng: &mut R, q: &QmrErrorModel, truth: f64, domestic: bool) -> Option<f64> {
    let missing = rng.random::<f64>() < q.missing_probability;
    let mut v = truth * noise_factor(rng, q.sigma);
    let p = if domestic {
        q.gross_probability_domestic
    } else {
        q.gross_probability_non_domestic
    };
    let gross = rng.random::<f64>() < p;
    let factor = match q.gross_factor {
        Some(g) => g,
        None if q.gross_factor_min == q.gross_factor_max => q.gross_factor_min,
        None => rng.random_range(q.gross_factor_min..=q.gross_factor_max),
    };
    if gross {
        v *= factor;
    }
    (!missing).then_some(v)
}

fn log_uniform_count<R: Rng>(rng: &mut R, lo: usize, hi: usize) -> usize {
    if lo == hi {
        return lo;
    }
    let x = rng.random_range((lo as f64).ln()..((hi + 1) as f64).ln());
    (x.exp().floor() as usize).clamp(lo, hi)
}

/// Generates feeder `index` of the scenario.
pub fn generate_feeder(cfg: &ScenarioConfig, gen: &GeneratedPool, index: usize) -> Result<(Feeder, FeederTruth)> {
    let mut rng: StreamRng = rng::stream(derive_seed(cfg.seed, "feeder"), index as u64);
    let fc = &cfg.feeders;
    let pool = &gen.pool;
    let window = pool.window();
    let feeder_id = format!("F{:03}", index + 1);

    let size = log_uniform_count(&mut rng, fc.customers_min, fc.customers_max);
    let n_nd = rng.random_range(fc.non_domestic_min..=fc.non_domestic_max.min(size));
    let n_dom = size - n_nd;
    if n_dom > 0 && gen.monitored == 0 {
        return Err(Error::EmptyGroup("no monitored domestic profiles in the pool".into()));
    }
    let types: Vec<String> = if fc.non_domestic_types.is_empty() {
        gen.catalogue.iter().map(|c| c.type_tag.clone()).collect()
    } else {
        fc.non_domestic_types.clone()
    };

    let mut customers = Vec::with_capacity(size);
    let mut truths = Vec::with_capacity(size);
    let mut aggregate = vec![0.0; window.slots()];
    let mut negative = false;
    let mut add = |agg: &mut Vec<f64>, s: &HalfHourlySeries| {
        negative |= s.allows_negative();
        agg.iter_mut().zip(s.values()).for_each(|(a, v)| *a += v);
    };

    for j in 0..size {
        let customer_id = format!("{feeder_id}-C{:03}", j + 1);
        if j < n_dom {
            let template = pool.get(rng.random_range(0..gen.monitored));
            let GroupKey::Domestic {
                profile_class,
                band_group,
                has_solar,
            } = template.group
            else {
                unreachable!("monitored profiles are domestic")
            };
            let bands = band_group.bands();
            let band = bands[rng.random_range(0..bands.len())];
            let class = CustomerClass::domestic(profile_class, band, has_solar);
            let (true_mean, profile_id) = match cfg.truth_source {
                TruthSource::Pool => {
                    add(&mut aggregate, &template.series);
                    (template.mean_daily, Some(template.id.clone()))
                }
                TruthSource::HeldOut => {
                    let stats = match (profile_class, has_solar) {
                        (_, true) => &cfg.pool.solar_demand,
                        (ProfileClass::Pc1, false) => &cfg.pool.pc1_demand,
                        (ProfileClass::Pc2, false) => &cfg.pool.pc2_demand,
                    };
                    let mean = stats.sample(&mut rng)?;
                    let fraction = if has_solar { cfg.pool.solar_fraction } else { 0.0 };
                    let s = shapes::domestic_series(&mut rng, window, profile_class, mean, fraction, &cfg.noise)?;
                    add(&mut aggregate, &s);
                    (mean_daily_demand(&s)?, None)
                }
            };
            let reading = qmr_reading(&mut rng, &cfg.qmr, true_mean, true);
            customers.push(Customer::new(customer_id.clone(), class, reading)?);
            truths.push(CustomerTruth {
                customer_id,
                true_mean_daily: true_mean,
                profile_id,
                alpha: None,
                base_mean_daily: None,
            });
        } else {
            let tag = &types[rng.random_range(0..types.len())];
            let std_id = format!("{STANDARD_PROFILE_PREFIX}{tag}");
            let k = pool
                .index_of(&std_id)
                .ok_or_else(|| Error::config(format!("non-domestic type {tag:?} is not in the catalogue")))?;
            let u_base = fc.non_domestic_demand.sample(&mut rng)?;
            let alpha = if fc.alpha_true_min == fc.alpha_true_max {
                fc.alpha_true_min
            } else {
                rng.random_range(fc.alpha_true_min..=fc.alpha_true_max)
            };
            let s = shapes::non_domestic_series(&mut rng, &pool.get(k).series, alpha * u_base, cfg.noise.non_domestic_sigma)?;
            add(&mut aggregate, &s);
            let reading = qmr_reading(&mut rng, &cfg.qmr, u_base, false);
            customers.push(Customer::new(customer_id.clone(), CustomerClass::non_domestic(tag.clone()), reading)?);
            truths.push(CustomerTruth {
                customer_id,
                true_mean_daily: alpha * u_base,
                profile_id: Some(std_id),
                alpha: Some(alpha),
                base_mean_daily: Some(u_base),
            });
        }
    }

    let clean = HalfHourlySeries::build(window.start, aggregate, negative)?;
    let measured = if cfg.noise.measurement_sigma > 0.0 {
        let sigma = cfg.noise.measurement_sigma;
        let values = clean.values().iter().map(|v| v * noise_factor(&mut rng, sigma)).collect();
        HalfHourlySeries::build(window.start, values, negative)?
    } else {
        clean.clone()
    };
    let feeder = Feeder::new(feeder_id.clone(), customers, Some(measured))?;
    Ok((
        feeder,
        FeederTruth {
            feeder_id,
            customers: truths,
            aggregate: Some(clean),
        },
    ))
}

/// A generated network.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub pool: GeneratedPool,
    pub feeders: Vec<Feeder>,
    pub truths: Vec<FeederTruth>,
}

pub fn generate_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let pool = generate_pool(cfg)?;
    let (feeders, truths) = (0..cfg.feeders.count)
        .into_par_iter()
        .map(|i| generate_feeder(cfg, &pool, i))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(Scenario {
        config: cfg.clone(),
        pool,
        feeders,
        truths,
    })
}

/// Writes the scenario as an ingestible dataset plus truth files; returns the paths written.
pub fn write_dataset(dir: &Path, scenario: &Scenario) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let mut record = |p: PathBuf| {
        written.push(p.clone());
        p
    };
    let monitored = &scenario.pool.pool.profiles()[..scenario.pool.monitored];
    files::write_profiles_csv(&record(dir.join(PROFILES_FILE)), monitored)?;
    files::write_catalogue(&record(dir.join(CATALOGUE_FILE)), &scenario.pool.catalogue)?;
    files::write_calendar(&record(dir.join(CALENDAR_FILE)), &scenario.pool.calendar)?;

    let mut qmr = Vec::new();
    let mut topology = Vec::new();
    for f in &scenario.feeders {
        qmr.extend(f.customers.iter().map(|c| QmrRecord {
            customer_id: c.id.clone(),
            class: c.class.clone(),
            mean_daily_kwh: c.qmr_mean_daily,
        }));
        let rel = format!("{SUBSTATION_DIR}/{}.csv", f.id);
        files::write_substation_csv(&record(dir.join(&rel)), f.substation()?)?;
        topology.push(FeederTopology {
            feeder_id: f.id.clone(),
            customers: f.customers.iter().map(|c| c.id.clone()).collect(),
            substation_csv: Some(rel),
        });
    }
    files::write_qmr_csv(&record(dir.join(QMR_FILE)), &qmr)?;
    files::write_topology(&record(dir.join(TOPOLOGY_FILE)), &topology)?;
    files::write_json(&record(dir.join(TRUTH_FILE)), &scenario.truths)?;
    files::write_json(&record(dir.join(SCENARIO_FILE)), &scenario.config)?;
    Ok(written)
}

pub fn read_truth(dir: &Path) -> Result<Vec<FeederTruth>> {
    files::read_json(&dir.join(TRUTH_FILE))
}

//! Loading, cleaning and assembling datasets from disk.

pub mod annualize;
pub mod clean;
pub mod files;

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::catalogue::StandardProfile;
use crate::error::{Error, Result};
use crate::model::{impute_mean_daily, Customer, Feeder, GroupKey, MonitoredPool, MonitoredProfile};

pub use annualize::{
    annualize_standard_profile, expand_standard_profile, HolidayCalendar, HolidayEntry, HolidayKind,
};
pub use clean::{clean_series, AnomalyKind, CleaningPolicy, CleaningReport, RawSeries};
pub use files::{FeederTopology, QmrRecord};

pub const PROFILES_FILE: &str = "profiles.csv";
pub const QMR_FILE: &str = "qmr.csv";
pub const TOPOLOGY_FILE: &str = "topology.json";
pub const CATALOGUE_FILE: &str = "catalogue.json";
pub const CALENDAR_FILE: &str = "calendar.json";

/// Prefix of pool ids given to annualised standard profiles.
pub const STANDARD_PROFILE_PREFIX: &str = "std:";

/// What a profiles file may contain.
#[derive(Debug, Clone, Default)]
pub struct ProfileSchema {
    /// Non-domestic types whose `ND:<tag>` groups are accepted.
    pub known_types: Vec<String>,
    pub cleaning: CleaningPolicy,
}

impl ProfileSchema {
    pub fn valid_groups(&self) -> Vec<String> {
        let mut v = GroupKey::domestic_labels();
        v.extend(self.known_types.iter().map(|t| format!("ND:{t}")));
        v
    }
}

/// Monitored profiles read from disk, with the cleaning applied to each.
#[derive(Debug, Clone)]
pub struct LoadedProfiles {
    pub pool: MonitoredPool,
    pub cleaning: Vec<(String, CleaningReport)>,
}

/// Reads and cleans a profiles CSV into a pool.
pub fn load_profiles(path: &Path, schema: &ProfileSchema) -> Result<LoadedProfiles> {
    let rows = files::read_profiles_csv(path, &schema.valid_groups())?;
    let mut seen = HashSet::new();
    let mut profiles = Vec::with_capacity(rows.len());
    let mut cleaning = Vec::new();
    for row in rows {
        if !seen.insert(row.id.clone()) {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: row.line,
                message: format!("duplicate profile id {:?}", row.id),
            });
        }
        let (series, report) = clean_series(&row.raw, &schema.cleaning).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: row.line,
            message: format!("profile {}: {e}", row.id),
        })?;
        if !report.is_empty() {
            cleaning.push((row.id.clone(), report));
        }
        profiles.push(MonitoredProfile::new(row.id, row.group, series)?);
    }
    Ok(LoadedProfiles {
        pool: MonitoredPool::new(profiles)?,
        cleaning,
    })
}

/// Adds an annualised, normalised standard profile per catalogue type to the monitored profiles.
pub fn build_pool(
    monitored: Vec<MonitoredProfile>,
    catalogue: &[StandardProfile],
    calendar: &HolidayCalendar,
) -> Result<MonitoredPool> {
    let window = monitored
        .first()
        .ok_or_else(|| Error::domain("no monitored profiles"))?
        .series
        .window();
    let mut profiles = monitored;
    for sp in catalogue {
        let series = annualize_standard_profile(sp, window, calendar)?;
        profiles.push(MonitoredProfile::new(
            format!("{STANDARD_PROFILE_PREFIX}{}", sp.type_tag),
            GroupKey::NonDomestic(sp.type_tag.clone()),
            series,
        )?);
    }
    MonitoredPool::new(profiles)
}

/// Everything needed to buddy and bound a network.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub pool: MonitoredPool,
    pub feeders: Vec<Feeder>,
    pub catalogue: Vec<StandardProfile>,
    pub calendar: HolidayCalendar,
    /// Cleaning applied to monitored profiles and substation series, keyed by id.
    pub cleaning: Vec<(String, CleaningReport)>,
    /// Customers whose mean daily demand was imputed.
    pub imputed: usize,
}

impl Dataset {
    pub fn load(dir: &Path) -> Result<Self> {
        Self::load_with(dir, &CleaningPolicy::default())
    }

    pub fn load_with(dir: &Path, policy: &CleaningPolicy) -> Result<Self> {
        let catalogue = files::read_catalogue(&dir.join(CATALOGUE_FILE))?;
        let calendar = files::read_calendar(&dir.join(CALENDAR_FILE))?;
        let schema = ProfileSchema {
            known_types: catalogue.iter().map(|c| c.type_tag.clone()).collect(),
            cleaning: *policy,
        };
        let loaded = load_profiles(&dir.join(PROFILES_FILE), &schema)?;
        let window = loaded.pool.window();
        calendar.check_within(&window)?;
        let mut cleaning = loaded.cleaning;
        let pool = build_pool(loaded.pool.profiles().to_vec(), &catalogue, &calendar)?;

        let qmr = files::read_qmr_csv(&dir.join(QMR_FILE))?;
        let mut customers: HashMap<String, Customer> = HashMap::new();
        for r in qmr {
            if let crate::model::CustomerClass::NonDomestic { type_tag } = &r.class {
                crate::catalogue::find(&catalogue, type_tag)?;
            }
            let c = Customer::new(r.customer_id.clone(), r.class, r.mean_daily_kwh)?;
            if customers.insert(r.customer_id.clone(), c).is_some() {
                return Err(Error::domain(format!("duplicate customer id {:?}", r.customer_id)));
            }
        }

        let topology = files::read_topology(&dir.join(TOPOLOGY_FILE))?;
        let mut feeders = Vec::with_capacity(topology.len());
        let mut used = HashSet::new();
        for t in topology {
            let members = t
                .customers
                .iter()
                .map(|id| {
                    if !used.insert(id.clone()) {
                        return Err(Error::domain(format!("customer {id} is on two feeders")));
                    }
                    customers
                        .get(id)
                        .cloned()
                        .ok_or_else(|| Error::domain(format!("feeder {} lists unknown customer {id}", t.feeder_id)))
                })
                .collect::<Result<Vec<_>>>()?;
            let substation = match &t.substation_csv {
                Some(rel) => {
                    let mut raw = files::read_substation_csv(&dir.join(rel))?;
                    // solar export can drive the feeder total negative
                    raw.allows_negative = members.iter().any(|c| {
                        matches!(c.class, crate::model::CustomerClass::Domestic { has_solar: true, .. })
                    });
                    let (s, report) = clean_series(&raw, policy)?;
                    if !report.is_empty() {
                        cleaning.push((t.feeder_id.clone(), report));
                    }
                    Some(s)
                }
                None => None,
            };
            feeders.push(Feeder::new(t.feeder_id, members, substation)?);
        }
        let imputed = impute_mean_daily(feeders.iter_mut().flat_map(|f| f.customers.iter_mut()))?;

        Ok(Dataset {
            pool,
            feeders,
            catalogue,
            calendar,
            cleaning,
            imputed,
        })
    }
}

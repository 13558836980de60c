//! Customers, groups, monitored pools, feeders and buddy assignments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{mean_daily_demand, HalfHourlySeries, Window};

/// Lower bound of the non-domestic scaling parameter.
pub const ALPHA_MIN: f64 = 0.8;
/// Upper bound of the non-domestic scaling parameter.
pub const ALPHA_MAX: f64 = 1.2;

/// UK council tax band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaxBand {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
}

impl TaxBand {
    pub const ALL: [TaxBand; 8] = [
        TaxBand::A,
        TaxBand::B,
        TaxBand::C,
        TaxBand::D,
        TaxBand::E,
        TaxBand::F,
        TaxBand::G,
        TaxBand::H,
    ];

    /// Buddying group of the band; F, G and H share one group.
    pub fn group(self) -> BandGroup {
        match self {
            TaxBand::A => BandGroup::A,
            TaxBand::B => BandGroup::B,
            TaxBand::C => BandGroup::C,
            TaxBand::D => BandGroup::D,
            TaxBand::E => BandGroup::E,
            TaxBand::F | TaxBand::G | TaxBand::H => BandGroup::Fgh,
        }
    }

    fn letter(self) -> char {
        b"ABCDEFGH"[self as usize] as char
    }

    fn from_letter(c: &str) -> Option<Self> {
        TaxBand::ALL.into_iter().find(|b| c == b.letter().to_string())
    }
}

/// The six tax-band groups used for domestic buddying.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BandGroup {
    A,
    B,
    C,
    D,
    E,
    Fgh,
}

impl BandGroup {
    pub const ALL: [BandGroup; 6] = [
        BandGroup::A,
        BandGroup::B,
        BandGroup::C,
        BandGroup::D,
        BandGroup::E,
        BandGroup::Fgh,
    ];

    fn label(self) -> &'static str {
        match self {
            BandGroup::A => "A",
            BandGroup::B => "B",
            BandGroup::C => "C",
            BandGroup::D => "D",
            BandGroup::E => "E",
            BandGroup::Fgh => "FGH",
        }
    }

    /// Bands belonging to the group.
    pub fn bands(self) -> &'static [TaxBand] {
        match self {
            BandGroup::A => &[TaxBand::A],
            BandGroup::B => &[TaxBand::B],
            BandGroup::C => &[TaxBand::C],
            BandGroup::D => &[TaxBand::D],
            BandGroup::E => &[TaxBand::E],
            BandGroup::Fgh => &[TaxBand::F, TaxBand::G, TaxBand::H],
        }
    }
}

/// Domestic profile class (1 = standard tariff, 2 = Economy 7).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProfileClass {
    Pc1,
    Pc2,
}

impl ProfileClass {
    fn label(self) -> &'static str {
        match self {
            ProfileClass::Pc1 => "PC1",
            ProfileClass::Pc2 => "PC2",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "PC1" => Some(ProfileClass::Pc1),
            "PC2" => Some(ProfileClass::Pc2),
            _ => None,
        }
    }
}

/// Demographic class of a customer.
///
/// Text form: `PC1-C`, `PC2-G-PV` (solar) or `ND:<type_tag>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CustomerClass {
    Domestic {
        profile_class: ProfileClass,
        tax_band: TaxBand,
        has_solar: bool,
    },
    NonDomestic {
        type_tag: String,
    },
}

impl CustomerClass {
    pub fn domestic(profile_class: ProfileClass, tax_band: TaxBand, has_solar: bool) -> Self {
        CustomerClass::Domestic {
            profile_class,
            tax_band,
            has_solar,
        }
    }

    pub fn non_domestic(type_tag: impl Into<String>) -> Self {
        CustomerClass::NonDomestic {
            type_tag: type_tag.into(),
        }
    }

    pub fn is_domestic(&self) -> bool {
        matches!(self, CustomerClass::Domestic { .. })
    }

    pub fn group_key(&self) -> GroupKey {
        match self {
            CustomerClass::Domestic {
                profile_class,
                tax_band,
                has_solar,
            } => GroupKey::Domestic {
                profile_class: *profile_class,
                band_group: tax_band.group(),
                has_solar: *has_solar,
            },
            CustomerClass::NonDomestic { type_tag } => GroupKey::NonDomestic(type_tag.clone()),
        }
    }

    pub fn profile_class(&self) -> Option<ProfileClass> {
        match self {
            CustomerClass::Domestic { profile_class, .. } => Some(*profile_class),
            CustomerClass::NonDomestic { .. } => None,
        }
    }
}

impl fmt::Display for CustomerClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CustomerClass::Domestic {
                profile_class,
                tax_band,
                has_solar,
            } => {
                write!(f, "{}-{}", profile_class.label(), tax_band.letter())?;
                if *has_solar {
                    write!(f, "-PV")?;
                }
                Ok(())
            }
            CustomerClass::NonDomestic { type_tag } => write!(f, "ND:{type_tag}"),
        }
    }
}

impl FromStr for CustomerClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(tag) = s.strip_prefix("ND:") {
            if tag.is_empty() {
                return Err(Error::domain("empty non-domestic type tag"));
            }
            return Ok(CustomerClass::non_domestic(tag));
        }
        let parts: Vec<&str> = s.split('-').collect();
        let bad = || Error::domain(format!("unrecognised customer class {s:?}"));
        let (pc, band, solar) = match parts.as_slice() {
            [pc, band] => (pc, band, false),
            [pc, band, "PV"] => (pc, band, true),
            _ => return Err(bad()),
        };
        Ok(CustomerClass::domestic(
            ProfileClass::parse(pc).ok_or_else(bad)?,
            TaxBand::from_letter(band).ok_or_else(bad)?,
            solar,
        ))
    }
}

impl Serialize for CustomerClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CustomerClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Key deciding which monitored profiles may buddy a customer.
///
/// Text form: `PC1-C`, `PC1-FGH-PV` or `ND:<type_tag>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GroupKey {
    Domestic {
        profile_class: ProfileClass,
        band_group: BandGroup,
        has_solar: bool,
    },
    NonDomestic(String),
}

impl GroupKey {
    pub fn is_domestic(&self) -> bool {
        matches!(self, GroupKey::Domestic { .. })
    }

    pub fn profile_class(&self) -> Option<ProfileClass> {
        match self {
            GroupKey::Domestic { profile_class, .. } => Some(*profile_class),
            GroupKey::NonDomestic(_) => None,
        }
    }

    /// Every domestic group label, in canonical order.
    pub fn domestic_labels() -> Vec<String> {
        let mut out = Vec::new();
        for pc in [ProfileClass::Pc1, ProfileClass::Pc2] {
            for solar in [false, true] {
                for bg in BandGroup::ALL {
                    out.push(
                        GroupKey::Domestic {
                            profile_class: pc,
                            band_group: bg,
                            has_solar: solar,
                        }
                        .to_string(),
                    );
                }
            }
        }
        out
    }
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupKey::Domestic {
                profile_class,
                band_group,
                has_solar,
            } => {
                write!(f, "{}-{}", profile_class.label(), band_group.label())?;
                if *has_solar {
                    write!(f, "-PV")?;
                }
                Ok(())
            }
            GroupKey::NonDomestic(tag) => write!(f, "ND:{tag}"),
        }
    }
}

impl FromStr for GroupKey {
    type Err = Error;

    /// Accepts group labels and, for convenience, full class labels (`PC1-G` maps to `PC1-FGH`).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('-').collect();
        let group = |pc: &str, bg: &str, solar: bool| -> Option<GroupKey> {
            let profile_class = ProfileClass::parse(pc)?;
            let band_group = BandGroup::ALL
                .into_iter()
                .find(|g| g.label() == bg)
                .or_else(|| TaxBand::from_letter(bg).map(TaxBand::group))?;
            Some(GroupKey::Domestic {
                profile_class,
                band_group,
                has_solar: solar,
            })
        };
        let parsed = match parts.as_slice() {
            _ if s.starts_with("ND:") => CustomerClass::from_str(s).ok().map(|c| c.group_key()),
            [pc, bg] => group(pc, bg, false),
            [pc, bg, "PV"] => group(pc, bg, true),
            _ => None,
        };
        parsed.ok_or_else(|| Error::domain(format!("unrecognised group label {s:?}")))
    }
}

impl Serialize for GroupKey {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GroupKey {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// An unmonitored customer connected to a feeder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Customer {
    pub id: String,
    pub class: CustomerClass,
    /// Mean daily demand from quarterly meter readings, kWh/day.
    pub qmr_mean_daily: Option<f64>,
    /// Set when `qmr_mean_daily` was filled in by [`impute_mean_daily`].
    #[serde(default)]
    pub imputed: bool,
}

impl Customer {
    pub fn new(id: impl Into<String>, class: CustomerClass, qmr_mean_daily: Option<f64>) -> Result<Self> {
        let id = id.into();
        if let Some(u) = qmr_mean_daily {
            if !(u.is_finite() && u > 0.0) {
                return Err(Error::domain(format!(
                    "customer {id}: mean daily demand must be positive and finite, got {u}"
                )));
            }
        }
        Ok(Customer {
            id,
            class,
            qmr_mean_daily,
            imputed: false,
        })
    }

    pub fn group_key(&self) -> GroupKey {
        self.class.group_key()
    }

    pub fn is_domestic(&self) -> bool {
        self.class.is_domestic()
    }

    /// `U_j`, or a domain error if it is still unknown.
    pub fn mean_daily(&self) -> Result<f64> {
        self.qmr_mean_daily.ok_or_else(|| {
            Error::domain(format!("customer {} has no mean daily demand", self.id))
        })
    }
}

/// Fills in missing `qmr_mean_daily` values across a whole network.
///
/// A missing value takes the mean over customers sharing its group key; if
/// none of those are known, the mean over all customers of the same kind
/// (domestic or non-domestic). Returns the number of imputed customers.
pub fn impute_mean_daily<'a, I>(customers: I) -> Result<usize>
where
    I: IntoIterator<Item = &'a mut Customer>,
{
    let mut customers: Vec<&mut Customer> = customers.into_iter().collect();
    let mut by_group: HashMap<GroupKey, (f64, usize)> = HashMap::new();
    let mut by_kind: [(f64, usize); 2] = [(0.0, 0); 2];
    for c in customers.iter() {
        if let Some(u) = c.qmr_mean_daily {
            let e = by_group.entry(c.group_key()).or_insert((0.0, 0));
            e.0 += u;
            e.1 += 1;
            let k = &mut by_kind[c.is_domestic() as usize];
            k.0 += u;
            k.1 += 1;
        }
    }
    let mut n = 0;
    for c in customers.iter_mut() {
        if c.qmr_mean_daily.is_some() {
            continue;
        }
        let (sum, count) = match by_group.get(&c.group_key()) {
            Some(&(s, k)) if k > 0 => (s, k),
            _ => by_kind[c.is_domestic() as usize],
        };
        if count == 0 {
            return Err(Error::domain(format!(
                "cannot impute mean daily demand for {}: no known values of its kind",
                c.id
            )));
        }
        c.qmr_mean_daily = Some(sum / count as f64);
        c.imputed = true;
        n += 1;
    }
    Ok(n)
}

/// A monitored (or standard) profile available as a buddy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoredProfile {
    pub id: String,
    pub group: GroupKey,
    pub series: HalfHourlySeries,
    /// Cached mean daily demand of `series`, kWh/day.
    pub mean_daily: f64,
}

impl MonitoredProfile {
    pub fn new(id: impl Into<String>, group: GroupKey, series: HalfHourlySeries) -> Result<Self> {
        let mean_daily = mean_daily_demand(&series)?;
        Ok(MonitoredProfile {
            id: id.into(),
            group,
            series,
            mean_daily,
        })
    }
}

/// The buddy candidates: monitored domestic profiles plus normalised standard
/// profiles for non-domestic types, all on one window.
#[derive(Debug, Clone)]
pub struct MonitoredPool {
    profiles: Vec<MonitoredProfile>,
    window: Window,
    groups: BTreeMap<GroupKey, Vec<usize>>,
}

impl MonitoredPool {
    pub fn new(profiles: Vec<MonitoredProfile>) -> Result<Self> {
        let first = profiles
            .first()
            .ok_or_else(|| Error::domain("monitored pool is empty"))?;
        let window = first.series.window();
        let mut seen = HashSet::new();
        let mut groups: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
        for (i, p) in profiles.iter().enumerate() {
            if !seen.insert(p.id.as_str()) {
                return Err(Error::domain(format!("duplicate profile id {:?}", p.id)));
            }
            if p.series.window() != window {
                return Err(Error::WindowMismatch(format!(
                    "profile {} covers {}+{}d, pool covers {}+{}d",
                    p.id,
                    p.series.start(),
                    p.series.days(),
                    window.start,
                    window.days
                )));
            }
            groups.entry(p.group.clone()).or_default().push(i);
        }
        Ok(MonitoredPool {
            profiles,
            window,
            groups,
        })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn profiles(&self) -> &[MonitoredProfile] {
        &self.profiles
    }

    pub fn get(&self, index: usize) -> &MonitoredProfile {
        &self.profiles[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.profiles.iter().position(|p| p.id == id)
    }

    pub fn groups(&self) -> impl Iterator<Item = (&GroupKey, &[usize])> {
        self.groups.iter().map(|(k, v)| (k, v.as_slice()))
    }

    /// Pool indices in `group`, ascending.
    pub fn candidates(&self, group: &GroupKey) -> Result<&[usize]> {
        self.groups
            .get(group)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::EmptyGroup(format!("no monitored profiles in group {group}")))
    }

    /// Pool indices of domestic profiles of one profile class.
    pub fn class_members(&self, class: ProfileClass, include_solar: bool) -> Vec<usize> {
        self.groups
            .iter()
            .filter(|(k, _)| match k {
                GroupKey::Domestic {
                    profile_class,
                    has_solar,
                    ..
                } => *profile_class == class && (include_solar || !has_solar),
                GroupKey::NonDomestic(_) => false,
            })
            .flat_map(|(_, v)| v.iter().copied())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Pool restricted to a sub-window; cached means are recomputed on it.
    pub fn restrict(&self, window: Window) -> Result<MonitoredPool> {
        let profiles = self
            .profiles
            .iter()
            .map(|p| MonitoredProfile::new(p.id.clone(), p.group.clone(), p.series.slice(window)?))
            .collect::<Result<Vec<_>>>()?;
        MonitoredPool::new(profiles)
    }

    /// Checks every cached mean against a recomputation (1e-9 relative).
    pub fn audit(&self) -> Result<()> {
        for p in &self.profiles {
            let fresh = mean_daily_demand(&p.series)?;
            let tol = 1e-9 * fresh.abs().max(1e-300);
            if (fresh - p.mean_daily).abs() > tol {
                return Err(Error::domain(format!(
                    "profile {}: cached mean {} differs from recomputed {}",
                    p.id, p.mean_daily, fresh
                )));
            }
        }
        Ok(())
    }
}

/// A low-voltage feeder: its customers and, optionally, its measured demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Feeder {
    pub id: String,
    pub customers: Vec<Customer>,
    pub substation: Option<HalfHourlySeries>,
}

impl Feeder {
    pub fn new(
        id: impl Into<String>,
        customers: Vec<Customer>,
        substation: Option<HalfHourlySeries>,
    ) -> Result<Self> {
        let id = id.into();
        if customers.is_empty() {
            return Err(Error::domain(format!("feeder {id} has no customers")));
        }
        Ok(Feeder {
            id,
            customers,
            substation,
        })
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    pub fn n_domestic(&self) -> usize {
        self.customers.iter().filter(|c| c.is_domestic()).count()
    }

    pub fn n_non_domestic(&self) -> usize {
        self.len() - self.n_domestic()
    }

    pub fn substation(&self) -> Result<&HalfHourlySeries> {
        self.substation
            .as_ref()
            .ok_or_else(|| Error::domain(format!("feeder {} has no substation series", self.id)))
    }

    /// `D`: the sum of all customers' mean daily demands.
    pub fn total_mean_daily(&self) -> Result<f64> {
        self.customers.iter().map(Customer::mean_daily).sum()
    }
}

/// One customer's buddy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Buddy {
    /// Index into the monitored pool.
    pub profile: usize,
    /// Scaling of a non-domestic standard profile; absent for domestic customers.
    pub alpha: Option<f64>,
}

/// Buddies for every customer of a feeder, in customer order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuddyAssignment {
    pub buddies: Vec<Buddy>,
}

impl BuddyAssignment {
    pub fn new(buddies: Vec<Buddy>) -> Self {
        BuddyAssignment { buddies }
    }

    /// Checks group agreement, alpha presence and the alpha range.
    pub fn validate(&self, feeder: &Feeder, pool: &MonitoredPool) -> Result<()> {
        self.validate_with_bounds(feeder, pool, ALPHA_MIN, ALPHA_MAX)
    }

    pub(crate) fn validate_with_bounds(
        &self,
        feeder: &Feeder,
        pool: &MonitoredPool,
        lo: f64,
        hi: f64,
    ) -> Result<()> {
        if self.buddies.len() != feeder.len() {
            return Err(Error::domain(format!(
                "assignment has {} buddies for {} customers",
                self.buddies.len(),
                feeder.len()
            )));
        }
        for (c, b) in feeder.customers.iter().zip(&self.buddies) {
            if b.profile >= pool.len() {
                return Err(Error::domain(format!(
                    "customer {}: profile index {} out of range",
                    c.id, b.profile
                )));
            }
            let p = pool.get(b.profile);
            if p.group != c.group_key() {
                return Err(Error::domain(format!(
                    "customer {} ({}) buddied with profile {} of group {}",
                    c.id,
                    c.group_key(),
                    p.id,
                    p.group
                )));
            }
            match (c.is_domestic(), b.alpha) {
                (true, None) => {}
                (false, Some(a)) if a.is_finite() && (lo..=hi).contains(&a) => {}
                (false, Some(a)) => {
                    return Err(Error::domain(format!(
                        "customer {}: alpha {a} outside [{lo}, {hi}]",
                        c.id
                    )))
                }
                (true, Some(_)) => {
                    return Err(Error::domain(format!(
                        "domestic customer {} carries an alpha",
                        c.id
                    )))
                }
                (false, None) => {
                    return Err(Error::domain(format!(
                        "non-domestic customer {} has no alpha",
                        c.id
                    )))
                }
            }
        }
        Ok(())
    }

    /// Per-customer multiplier applied to the buddy's series.
    pub(crate) fn weights(&self, feeder: &Feeder) -> Result<Vec<f64>> {
        feeder
            .customers
            .iter()
            .zip(&self.buddies)
            .map(|(c, b)| {
                if c.is_domestic() {
                    Ok(1.0)
                } else {
                    let alpha = b.alpha.ok_or_else(|| {
                        Error::domain(format!("non-domestic customer {} has no alpha", c.id))
                    })?;
                    Ok(alpha * c.mean_daily()?)
                }
            })
            .collect()
    }
}

/// Aggregate demand `a(h)` of a feeder's buddies over the pool's window.
///
/// Domestic buddies are added as-is; a non-domestic buddy contributes
/// `alpha_j * U_j` times its normalised standard profile.
pub fn aggregate_assignment(
    feeder: &Feeder,
    assignment: &BuddyAssignment,
    pool: &MonitoredPool,
) -> Result<HalfHourlySeries> {
    if assignment.buddies.len() != feeder.len() {
        return Err(Error::domain(format!(
            "assignment has {} buddies for {} customers",
            assignment.buddies.len(),
            feeder.len()
        )));
    }
    let weights = assignment.weights(feeder)?;
    let window = pool.window();
    let mut out = vec![0.0; window.slots()];
    let mut negative = false;
    for (b, w) in assignment.buddies.iter().zip(&weights) {
        let p = &pool.get(b.profile).series;
        negative |= p.allows_negative();
        for (o, v) in out.iter_mut().zip(p.values()) {
            *o += w * v;
        }
    }
    HalfHourlySeries::build(window.start, out, negative)
}

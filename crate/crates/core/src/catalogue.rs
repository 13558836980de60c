//! Standard weekly profiles for non-domestic customer types.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{SLOTS_PER_DAY, SLOTS_PER_WEEK};

/// Which calendar days replace the weekly shape with the non-operational day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HolidayRule {
    /// School holidays and bank holidays.
    SchoolAndBank,
    /// Bank holidays only.
    BankOnly,
    Never,
}

/// A typical week (Monday 00:00 to Sunday 23:30) plus a non-operational day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardProfile {
    pub type_tag: String,
    pub weekly_shape: Vec<f64>,
    pub non_operational_shape: Vec<f64>,
    pub holiday_rule: HolidayRule,
}

impl StandardProfile {
    pub fn validate(&self) -> Result<()> {
        if self.type_tag.is_empty() {
            return Err(Error::domain("standard profile with empty type tag"));
        }
        if self.weekly_shape.len() != SLOTS_PER_WEEK {
            return Err(Error::domain(format!(
                "{}: weekly shape has {} slots, expected {SLOTS_PER_WEEK}",
                self.type_tag,
                self.weekly_shape.len()
            )));
        }
        if self.non_operational_shape.len() != SLOTS_PER_DAY {
            return Err(Error::domain(format!(
                "{}: non-operational shape has {} slots, expected {SLOTS_PER_DAY}",
                self.type_tag,
                self.non_operational_shape.len()
            )));
        }
        let all = self.weekly_shape.iter().chain(&self.non_operational_shape);
        if all.clone().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::domain(format!(
                "{}: shapes must be finite and non-negative",
                self.type_tag
            )));
        }
        if self.weekly_shape.iter().sum::<f64>() <= 0.0 {
            return Err(Error::domain(format!("{}: weekly shape is all zero", self.type_tag)));
        }
        Ok(())
    }
}

/// Operating pattern used to draw a day's shape.
#[derive(Clone, Copy)]
struct Hours {
    /// Opening and closing times in hours, fractional allowed; `open > close` wraps past midnight.
    open: f64,
    close: f64,
    level: f64,
}

const CLOSED: Option<Hours> = None;

fn day_shape(base: f64, hours: Option<Hours>, extra: Option<Hours>) -> Vec<f64> {
    (0..SLOTS_PER_DAY)
        .map(|h| {
            let mid = (h as f64 + 0.5) / 2.0;
            base + hours.map_or(0.0, |o| level_at(mid, o)) + extra.map_or(0.0, |o| level_at(mid, o))
        })
        .collect()
}

/// Trapezoid with one-hour ramps at either end.
fn level_at(t: f64, o: Hours) -> f64 {
    let inside = |t: f64, a: f64, b: f64| -> f64 {
        if t < a || t > b {
            0.0
        } else {
            ((t - a).min(b - t)).min(1.0)
        }
    };
    let frac = if o.open <= o.close {
        inside(t, o.open, o.close)
    } else {
        inside(t, o.open, 24.0 + 1.0).max(inside(t + 24.0, o.open, o.close + 24.0))
    };
    o.level * frac
}

fn week(days: [Vec<f64>; 7]) -> Vec<f64> {
    days.into_iter().flatten().collect()
}

fn profile(tag: &str, weekly: Vec<f64>, non_op: Vec<f64>, rule: HolidayRule) -> StandardProfile {
    StandardProfile {
        type_tag: tag.to_string(),
        weekly_shape: weekly,
        non_operational_shape: non_op,
        holiday_rule: rule,
    }
}

/// The shipped catalogue of non-domestic types.
pub fn builtin_catalogue() -> Vec<StandardProfile> {
    let mut out = Vec::new();

    let school_day = day_shape(0.15, Some(Hours { open: 7.5, close: 16.5, level: 1.0 }), CLOSED);
    let school_off = day_shape(0.15, CLOSED, CLOSED);
    out.push(profile(
        "school",
        week([
            school_day.clone(),
            school_day.clone(),
            school_day.clone(),
            school_day.clone(),
            school_day,
            school_off.clone(),
            school_off.clone(),
        ]),
        school_off,
        HolidayRule::SchoolAndBank,
    ));

    let cc_day = day_shape(
        0.1,
        Some(Hours { open: 9.0, close: 21.5, level: 0.6 }),
        Some(Hours { open: 17.5, close: 21.0, level: 0.4 }),
    );
    let cc_sat = day_shape(0.1, Some(Hours { open: 10.0, close: 16.0, level: 0.5 }), CLOSED);
    let cc_off = day_shape(0.1, CLOSED, CLOSED);
    out.push(profile(
        "community-centre",
        week([
            cc_day.clone(),
            cc_day.clone(),
            cc_day.clone(),
            cc_day.clone(),
            cc_day,
            cc_sat,
            cc_off.clone(),
        ]),
        cc_off,
        HolidayRule::SchoolAndBank,
    ));

    let lighting = day_shape(0.03, Some(Hours { open: 18.0, close: 7.0, level: 1.0 }), CLOSED);
    out.push(profile(
        "landlord-lighting",
        week(std::array::from_fn(|_| lighting.clone())),
        lighting.clone(),
        HolidayRule::Never,
    ));

    let office_day = day_shape(0.2, Some(Hours { open: 8.0, close: 18.0, level: 1.0 }), CLOSED);
    let office_off = day_shape(0.2, CLOSED, CLOSED);
    out.push(profile(
        "office",
        week([
            office_day.clone(),
            office_day.clone(),
            office_day.clone(),
            office_day.clone(),
            office_day,
            office_off.clone(),
            office_off.clone(),
        ]),
        office_off,
        HolidayRule::BankOnly,
    ));

    let ind_high = day_shape(0.75, Some(Hours { open: 6.0, close: 22.0, level: 0.35 }), CLOSED);
    let ind_high_off = day_shape(0.75, CLOSED, CLOSED);
    out.push(profile(
        "industrial-high-lf",
        week(std::array::from_fn(|_| ind_high.clone())),
        ind_high_off,
        HolidayRule::BankOnly,
    ));

    let ind_low = day_shape(0.2, Some(Hours { open: 6.0, close: 22.0, level: 1.0 }), CLOSED);
    let ind_low_off = day_shape(0.2, CLOSED, CLOSED);
    out.push(profile(
        "industrial-low-lf",
        week(std::array::from_fn(|_| ind_low.clone())),
        ind_low_off,
        HolidayRule::BankOnly,
    ));

    out
}

/// Looks up a type tag in a catalogue.
pub fn find<'a>(catalogue: &'a [StandardProfile], type_tag: &str) -> Result<&'a StandardProfile> {
    catalogue
        .iter()
        .find(|p| p.type_tag == type_tag)
        .ok_or_else(|| {
            let known: Vec<&str> = catalogue.iter().map(|p| p.type_tag.as_str()).collect();
            Error::domain(format!(
                "unknown non-domestic type {type_tag:?}; catalogue has {}",
                known.join(", ")
            ))
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_profiles_are_valid() {
        let cat = builtin_catalogue();
        assert_eq!(cat.len(), 6);
        for p in &cat {
            p.validate().unwrap();
        }
        assert!(find(&cat, "school").is_ok());
        let err = find(&cat, "hospital").unwrap_err().to_string();
        assert!(err.contains("landlord-lighting"));
    }

    #[test]
    fn school_weekend_is_flat_base() {
        let cat = builtin_catalogue();
        let school = find(&cat, "school").unwrap();
        let saturday = &school.weekly_shape[5 * 48..6 * 48];
        assert!(saturday.iter().all(|v| (*v - 0.15).abs() < 1e-12));
        // Monday 10:00 is open
        assert!(school.weekly_shape[20] > 1.0);
    }

    #[test]
    fn landlord_lighting_is_overnight() {
        let cat = builtin_catalogue();
        let ll = find(&cat, "landlord-lighting").unwrap();
        assert!(ll.weekly_shape[2 * 2] > 0.9); // 02:00
        assert!(ll.weekly_shape[12 * 2] < 0.1); // 12:00
        assert!(ll.weekly_shape[22 * 2] > 0.9); // 22:00
    }

    #[test]
    fn rejects_wrong_lengths() {
        let mut p = builtin_catalogue().remove(0);
        p.weekly_shape.pop();
        assert!(p.validate().is_err());
    }
}

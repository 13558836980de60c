//! Expansion of weekly standard shapes into normalised profiles over a window.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{Deserialize, Serialize};

use crate::catalogue::{HolidayRule, StandardProfile};
use crate::error::{Error, Result};
use crate::series::{slot_of_week, HalfHourlySeries, Window, SLOTS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HolidayKind {
    BankHoliday,
    SchoolHoliday,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HolidayEntry {
    pub date: NaiveDate,
    pub kind: HolidayKind,
}

/// Dates tagged as bank or school holidays.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HolidayCalendar {
    days: BTreeMap<NaiveDate, BTreeSet<HolidayKind>>,
}

impl HolidayCalendar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, date: NaiveDate, kind: HolidayKind) {
        self.days.entry(date).or_default().insert(kind);
    }

    pub fn insert_range(&mut self, first: NaiveDate, last: NaiveDate, kind: HolidayKind) {
        let mut d = first;
        while d <= last {
            self.insert(d, kind);
            d = d + Days::new(1);
        }
    }

    pub fn is(&self, date: NaiveDate, kind: HolidayKind) -> bool {
        self.days.get(&date).is_some_and(|k| k.contains(&kind))
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }

    /// Whether a type with `rule` runs its non-operational day on `date`.
    pub fn substitutes(&self, rule: HolidayRule, date: NaiveDate) -> bool {
        match rule {
            HolidayRule::Never => false,
            HolidayRule::BankOnly => self.is(date, HolidayKind::BankHoliday),
            HolidayRule::SchoolAndBank => {
                self.is(date, HolidayKind::BankHoliday) || self.is(date, HolidayKind::SchoolHoliday)
            }
        }
    }

    pub fn entries(&self) -> Vec<HolidayEntry> {
        self.days
            .iter()
            .flat_map(|(d, ks)| ks.iter().map(|k| HolidayEntry { date: *d, kind: *k }))
            .collect()
    }

    pub fn from_entries(entries: impl IntoIterator<Item = HolidayEntry>) -> Self {
        let mut cal = Self::new();
        for e in entries {
            cal.insert(e.date, e.kind);
        }
        cal
    }

    /// Dates outside `window`, if any; every entry should lie within the dataset window.
    pub fn check_within(&self, window: &Window) -> Result<()> {
        match self.days.keys().find(|d| !window.contains_date(**d)) {
            Some(d) => Err(Error::domain(format!(
                "holiday {d} lies outside {}..={}",
                window.start,
                window.last_day()
            ))),
            None => Ok(()),
        }
    }

    /// Approximate English bank and school holidays for every year touching `window`,
    /// clipped to the window.
    pub fn england_like(window: Window) -> Self {
        let mut cal = Self::new();
        for year in window.start.year()..=window.last_day().year() {
            let ymd = |m, d| NaiveDate::from_ymd_opt(year, m, d).expect("valid date");
            let easter = easter_sunday(year);
            let bank = [
                next_weekday_on_or_after(ymd(1, 1)),
                easter - Days::new(2),
                easter + Days::new(1),
                first_weekday(year, 5, Weekday::Mon),
                last_weekday(year, 5, Weekday::Mon),
                last_weekday(year, 8, Weekday::Mon),
                ymd(12, 25),
                ymd(12, 26),
            ];
            for d in bank {
                cal.insert(d, HolidayKind::BankHoliday);
            }
            let school = HolidayKind::SchoolHoliday;
            cal.insert_range(ymd(1, 1), ymd(1, 4), school);
            cal.insert_range(ymd(2, 15), ymd(2, 21), school);
            cal.insert_range(easter - Days::new(9), easter + Days::new(7), school);
            cal.insert_range(ymd(5, 25), ymd(5, 31), school);
            cal.insert_range(ymd(7, 21), ymd(9, 3), school);
            cal.insert_range(ymd(10, 24), ymd(10, 31), school);
            cal.insert_range(ymd(12, 20), ymd(12, 31), school);
        }
        cal.days.retain(|d, _| window.contains_date(*d));
        cal
    }
}

fn next_weekday_on_or_after(d: NaiveDate) -> NaiveDate {
    match d.weekday() {
        Weekday::Sat => d + Days::new(2),
        Weekday::Sun => d + Days::new(1),
        _ => d,
    }
}

fn first_weekday(year: i32, month: u32, wd: Weekday) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(year, month, wd, 1).expect("valid month")
}

fn last_weekday(year: i32, month: u32, wd: Weekday) -> NaiveDate {
    (1..=5)
        .rev()
        .find_map(|n| NaiveDate::from_weekday_of_month_opt(year, month, wd, n))
        .expect("every month has at least four of each weekday")
}

/// Gregorian Easter Sunday (anonymous Gregorian algorithm).
pub fn easter_sunday(year: i32) -> NaiveDate {
    let a = year % 19;
    let b = year / 100;
    let c = year % 100;
    let d = b / 4;
    let e = b % 4;
    let f = (b + 8) / 25;
    let g = (b - f + 1) / 3;
    let h = (19 * a + b - d - g + 15) % 30;
    let i = c / 4;
    let k = c % 4;
    let l = (32 + 2 * e + 2 * i - h - k) % 7;
    let m = (a + 11 * h + 22 * l) / 451;
    let month = (h + l - 7 * m + 114) / 31;
    let day = (h + l - 7 * m + 114) % 31 + 1;
    NaiveDate::from_ymd_opt(year, month as u32, day as u32).expect("valid Easter date")
}

/// Tiles the weekly shape over `window` by weekday, substituting the
/// non-operational day on holidays the type observes. Not normalised.
pub fn expand_standard_profile(
    sp: &StandardProfile,
    window: Window,
    cal: &HolidayCalendar,
) -> Result<HalfHourlySeries> {
    sp.validate()?;
    if window.days < 7 {
        return Err(Error::domain(format!(
            "annualisation window of {} days is shorter than a week",
            window.days
        )));
    }
    let mut values = Vec::with_capacity(window.slots());
    for date in window.dates() {
        if cal.substitutes(sp.holiday_rule, date) {
            values.extend_from_slice(&sp.non_operational_shape);
        } else {
            values.extend((0..SLOTS_PER_DAY).map(|h| sp.weekly_shape[slot_of_week(date, h)]));
        }
    }
    HalfHourlySeries::new(window.start, values)
}

/// [`expand_standard_profile`] rescaled to a mean daily usage of exactly 1 kWh/day.
pub fn annualize_standard_profile(
    sp: &StandardProfile,
    window: Window,
    cal: &HolidayCalendar,
) -> Result<HalfHourlySeries> {
    let raw = expand_standard_profile(sp, window, cal)?;
    let total = raw.total();
    if total <= 0.0 {
        return Err(Error::domain(format!(
            "{}: expanded profile has zero energy",
            sp.type_tag
        )));
    }
    Ok(raw.scaled(window.days as f64 / total))
}

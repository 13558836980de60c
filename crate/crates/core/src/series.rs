//! Half-hourly energy series and calendar windows.
//!
//! Time is naive local calendar time: slot `t` of a series starting on
//! `start` is half-hour `t % 48` of day `start + t / 48`. No daylight-saving
//! arithmetic is done anywhere.

use chrono::{Datelike, Days, NaiveDate, NaiveDateTime, NaiveTime, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-hour slots per day.
pub const SLOTS_PER_DAY: usize = 48;
/// Half-hour slots per week (Monday 00:00 through Sunday 23:30).
pub const SLOTS_PER_WEEK: usize = 7 * SLOTS_PER_DAY;

/// A contiguous run of whole days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Window {
    pub start: NaiveDate,
    pub days: usize,
}

impl Window {
    pub fn new(start: NaiveDate, days: usize) -> Self {
        Window { start, days }
    }

    /// Window covering `first..=last`.
    pub fn inclusive(first: NaiveDate, last: NaiveDate) -> Result<Self> {
        let days = (last - first).num_days() + 1;
        if days < 1 {
            return Err(Error::domain(format!("window end {last} precedes start {first}")));
        }
        Ok(Window::new(first, days as usize))
    }

    pub fn slots(&self) -> usize {
        self.days * SLOTS_PER_DAY
    }

    /// First day after the window.
    pub fn end(&self) -> NaiveDate {
        self.start + Days::new(self.days as u64)
    }

    pub fn last_day(&self) -> NaiveDate {
        self.start + Days::new(self.days as u64 - 1)
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        other.start >= self.start && other.end() <= self.end()
    }

    pub fn contains_date(&self, date: NaiveDate) -> bool {
        date >= self.start && date < self.end()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.days).map(move |d| self.start + Days::new(d as u64))
    }
}

/// Timestamp of the start of a half-hour slot.
pub fn slot_timestamp(date: NaiveDate, half_hour: usize) -> NaiveDateTime {
    let minutes = (half_hour * 30) as u32;
    date.and_time(NaiveTime::from_hms_opt(minutes / 60, minutes % 60, 0).expect("valid slot"))
}

/// Slot-of-week index for a date and half-hour, Monday 00:00 = 0.
pub fn slot_of_week(date: NaiveDate, half_hour: usize) -> usize {
    date.weekday().num_days_from_monday() as usize * SLOTS_PER_DAY + half_hour
}

/// kWh per half-hour over a whole number of days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfHourlySeries {
    start: NaiveDate,
    values: Vec<f64>,
    #[serde(default)]
    allows_negative: bool,
}

impl HalfHourlySeries {
    /// Builds a series, checking length and value invariants.
    pub fn new(start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        Self::build(start, values, false)
    }

    /// Builds a series that may carry negative (export) values.
    pub fn with_negative(start: NaiveDate, values: Vec<f64>) -> Result<Self> {
        Self::build(start, values, true)
    }

    pub fn build(start: NaiveDate, values: Vec<f64>, allows_negative: bool) -> Result<Self> {
        if !values.len().is_multiple_of(SLOTS_PER_DAY) {
            return Err(Error::domain(format!(
                "series length {} is not a multiple of {SLOTS_PER_DAY}",
                values.len()
            )));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value {v} at slot {i}")));
        }
        if !allows_negative {
            if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
                return Err(Error::domain(format!("negative value {v} at slot {i}")));
            }
        }
        Ok(HalfHourlySeries {
            start,
            values,
            allows_negative,
        })
    }

    /// A series of `days` days holding `value` in every slot.
    pub fn constant(start: NaiveDate, days: usize, value: f64) -> Result<Self> {
        Self::build(start, vec![value; days * SLOTS_PER_DAY], value < 0.0)
    }

    pub fn zeros(window: Window) -> Self {
        HalfHourlySeries {
            start: window.start,
            values: vec![0.0; window.slots()],
            allows_negative: false,
        }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn allows_negative(&self) -> bool {
        self.allows_negative
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn days(&self) -> usize {
        self.values.len() / SLOTS_PER_DAY
    }

    pub fn window(&self) -> Window {
        Window::new(self.start, self.days())
    }

    /// `(date, half_hour)` of slot `t`.
    pub fn slot_datetime(&self, t: usize) -> (NaiveDate, usize) {
        (
            self.start + Days::new((t / SLOTS_PER_DAY) as u64),
            t % SLOTS_PER_DAY,
        )
    }

    pub fn weekday_of_slot(&self, t: usize) -> Weekday {
        self.slot_datetime(t).0.weekday()
    }

    /// Copy of the slots lying inside `window`.
    pub fn slice(&self, window: Window) -> Result<HalfHourlySeries> {
        let range = self.slot_range(window)?;
        Ok(HalfHourlySeries {
            start: window.start,
            values: self.values[range].to_vec(),
            allows_negative: self.allows_negative,
        })
    }

    /// Borrowed view of the slots lying inside `window`.
    pub fn view(&self, window: Window) -> Result<&[f64]> {
        let range = self.slot_range(window)?;
        Ok(&self.values[range])
    }

    fn slot_range(&self, window: Window) -> Result<std::ops::Range<usize>> {
        if !self.window().contains_window(&window) {
            return Err(Error::WindowMismatch(format!(
                "window {}+{}d not inside series {}+{}d",
                window.start,
                window.days,
                self.start,
                self.days()
            )));
        }
        let offset = (window.start - self.start).num_days() as usize * SLOTS_PER_DAY;
        Ok(offset..offset + window.slots())
    }

    /// Total energy per day.
    pub fn daily_totals(&self) -> Vec<f64> {
        self.values
            .chunks_exact(SLOTS_PER_DAY)
            .map(|d| d.iter().sum())
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Slot-wise `a·self`.
    pub fn scaled(&self, factor: f64) -> HalfHourlySeries {
        HalfHourlySeries {
            start: self.start,
            values: self.values.iter().map(|v| v * factor).collect(),
            allows_negative: self.allows_negative || factor < 0.0,
        }
    }

    /// Slot-wise sum of two series on the same window.
    pub fn try_add(&self, other: &HalfHourlySeries) -> Result<HalfHourlySeries> {
        self.check_same_window(other)?;
        Ok(HalfHourlySeries {
            start: self.start,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
            allows_negative: self.allows_negative || other.allows_negative,
        })
    }

    pub fn check_same_window(&self, other: &HalfHourlySeries) -> Result<()> {
        if self.start != other.start || self.len() != other.len() {
            return Err(Error::WindowMismatch(format!(
                "{}+{} slots vs {}+{} slots",
                self.start,
                self.len(),
                other.start,
                other.len()
            )));
        }
        Ok(())
    }
}

/// Mean daily demand: total energy divided by the number of days.
pub fn mean_daily_demand(series: &HalfHourlySeries) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::domain("mean daily demand of an empty series"));
    }
    Ok(series.total() / series.days() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn constant_half_kwh_is_24_per_day() {
        let s = HalfHourlySeries::constant(d(2015, 1, 5), 2, 0.5).unwrap();
        assert_eq!(mean_daily_demand(&s).unwrap(), 24.0);
    }

    #[test]
    fn zero_day_is_zero() {
        let s = HalfHourlySeries::constant(d(2015, 1, 5), 1, 0.0).unwrap();
        assert_eq!(mean_daily_demand(&s).unwrap(), 0.0);
    }

    #[test]
    fn empty_series_is_domain_error() {
        let s = HalfHourlySeries::new(d(2015, 1, 5), vec![]).unwrap();
        assert!(matches!(mean_daily_demand(&s), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_partial_days_and_bad_values() {
        assert!(HalfHourlySeries::new(d(2015, 1, 5), vec![1.0; 47]).is_err());
        let mut v = vec![1.0; 48];
        v[3] = f64::NAN;
        assert!(HalfHourlySeries::new(d(2015, 1, 5), v.clone()).is_err());
        v[3] = -0.2;
        assert!(HalfHourlySeries::new(d(2015, 1, 5), v.clone()).is_err());
        assert!(HalfHourlySeries::with_negative(d(2015, 1, 5), v).is_ok());
    }

    #[test]
    fn slot_mapping() {
        let s = HalfHourlySeries::constant(d(2015, 1, 5), 3, 1.0).unwrap();
        assert_eq!(s.slot_datetime(0), (d(2015, 1, 5), 0));
        assert_eq!(s.slot_datetime(49), (d(2015, 1, 6), 1));
        assert_eq!(s.slot_datetime(143), (d(2015, 1, 7), 47));
        // 2015-01-05 was a Monday
        assert_eq!(slot_of_week(d(2015, 1, 5), 0), 0);
        assert_eq!(slot_of_week(d(2015, 1, 11), 47), SLOTS_PER_WEEK - 1);
        assert_eq!(
            slot_timestamp(d(2015, 1, 5), 19).to_string(),
            "2015-01-05 09:30:00"
        );
    }

    #[test]
    fn slicing_respects_bounds() {
        let vals: Vec<f64> = (0..48 * 4).map(|i| i as f64).collect();
        let s = HalfHourlySeries::new(d(2015, 1, 5), vals).unwrap();
        let w = Window::new(d(2015, 1, 6), 2);
        let sub = s.slice(w).unwrap();
        assert_eq!(sub.values()[0], 48.0);
        assert_eq!(sub.len(), 96);
        assert!(s.slice(Window::new(d(2015, 1, 8), 2)).is_err());
        assert!(s.slice(Window::new(d(2015, 1, 4), 1)).is_err());
    }
}

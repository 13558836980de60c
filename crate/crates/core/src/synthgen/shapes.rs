//! Parametric daily shapes and noise for synthetic demand.

use chrono::{Datelike, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::model::ProfileClass;
use crate::series::{HalfHourlySeries, Window, SLOTS_PER_DAY};

use super::NoiseConfig;

/// Standard normal draw truncated to `[-2.5, 2.5]`.
pub(crate) fn truncated_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= 2.5 {
            return z;
        }
    }
}

/// Mean-one multiplicative factor with log-scale `sigma`.
pub(crate) fn noise_factor<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    let z = truncated_normal(rng);
    (sigma * z - 0.5 * sigma * sigma).exp()
}

fn bump(h: f64, centre: f64, width: f64) -> f64 {
    (-0.5 * ((h - centre) / width).powi(2)).exp()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-profile shape parameters.
struct ShapeParams {
    base: f64,
    morning: f64,
    evening: f64,
    night: f64,
    morning_shift: f64,
    evening_shift: f64,
    seasonal: f64,
}

impl ShapeParams {
    fn draw<R: Rng>(rng: &mut R, class: ProfileClass, seasonal_amplitude: f64) -> Self {
        let class_season = match class {
            ProfileClass::Pc1 => 1.0,
            ProfileClass::Pc2 => 1.5,
        };
        ShapeParams {
            base: rng.random_range(0.2..0.5),
            morning: rng.random_range(0.4..1.2),
            evening: rng.random_range(0.8..2.0),
            night: rng.random_range(1.5..3.5),
            morning_shift: rng.random_range(-2i32..=2) as f64,
            evening_shift: rng.random_range(-2i32..=2) as f64,
            seasonal: seasonal_amplitude * class_season * rng.random_range(0.5..1.5),
        }
    }

    fn day_shape(&self, class: ProfileClass, weekend: bool) -> [f64; SLOTS_PER_DAY] {
        let mut out = [0.0; SLOTS_PER_DAY];
        for (h, o) in out.iter_mut().enumerate() {
            let x = h as f64;
            let (m_centre, m_width, m_scale, plateau) = if weekend {
                (19.0, 3.0, 0.8, 0.5)
            } else {
                (15.0, 2.0, 1.0, 0.2)
            };
            let morning = m_scale * self.morning * bump(x, m_centre + self.morning_shift, m_width);
            let evening = self.evening * bump(x, 37.0 + self.evening_shift, 3.5);
            let daytime = plateau * sigmoid(x - 18.0) * sigmoid(34.0 - x);
            *o = match class {
                ProfileClass::Pc1 => self.base + morning + evening + daytime,
                ProfileClass::Pc2 => {
                    let night = self.night * sigmoid((x - 1.5) / 0.5) * sigmoid((14.5 - x) / 0.5);
                    self.base + night + 0.5 * morning + 0.6 * evening + 0.5 * daytime
                }
            };
        }
        out
    }
}

/// Heating-season factor, highest in mid-January.
fn season(date: NaiveDate, amplitude: f64) -> f64 {
    let doy = date.ordinal0() as f64;
    1.0 + amplitude * (2.0 * std::f64::consts::PI * (doy - 15.0) / 365.25).cos()
}

/// Solar-yield factor, highest at midsummer.
fn solar_season(date: NaiveDate) -> f64 {
    let doy = date.ordinal0() as f64;
    1.0 + 0.6 * (2.0 * std::f64::consts::PI * (doy - 172.0) / 365.25).cos()
}

/// A domestic series over `window` with mean daily consumption `mean_daily`.
///
/// With `solar_fraction > 0` a midday generation bell, averaging that
/// fraction of consumption, is subtracted and the series may go negative.
pub(crate) fn domestic_series<R: Rng>(
    rng: &mut R,
    window: Window,
    class: ProfileClass,
    mean_daily: f64,
    solar_fraction: f64,
    noise: &NoiseConfig,
) -> Result<HalfHourlySeries> {
    let params = ShapeParams::draw(rng, class, noise.seasonal_amplitude);
    let weekday = params.day_shape(class, false);
    let weekend = params.day_shape(class, true);
    let mut consumption = Vec::with_capacity(window.slots());
    for date in window.dates() {
        let shape = if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            &weekend
        } else {
            &weekday
        };
        let day = season(date, params.seasonal) * noise_factor(rng, noise.daily_sigma);
        for &s in shape {
            consumption.push(s * day * noise_factor(rng, noise.half_hourly_sigma));
        }
    }
    let scale = mean_daily * window.days as f64 / consumption.iter().sum::<f64>();
    consumption.iter_mut().for_each(|v| *v *= scale);
    if solar_fraction <= 0.0 {
        return HalfHourlySeries::new(window.start, consumption);
    }

    let mut generation = Vec::with_capacity(window.slots());
    for date in window.dates() {
        let day = solar_season(date) * rng.random_range(0.2..1.0);
        for h in 0..SLOTS_PER_DAY {
            let bell = if (10..=40).contains(&h) { bump(h as f64, 25.0, 4.0) } else { 0.0 };
            generation.push(bell * day);
        }
    }
    let g_scale = solar_fraction * mean_daily * window.days as f64 / generation.iter().sum::<f64>();
    let net = consumption
        .iter()
        .zip(&generation)
        .map(|(c, g)| c - g * g_scale)
        .collect();
    HalfHourlySeries::with_negative(window.start, net)
}

/// `scale * standard` with multiplicative daily and half-hourly noise.
pub(crate) fn non_domestic_series<R: Rng>(
    rng: &mut R,
    standard: &HalfHourlySeries,
    scale: f64,
    sigma: f64,
) -> Result<HalfHourlySeries> {
    if sigma == 0.0 {
        return Ok(standard.scaled(scale));
    }
    let mut values = Vec::with_capacity(standard.len());
    for day in standard.values().chunks(SLOTS_PER_DAY) {
        let f = noise_factor(rng, sigma);
        for v in day {
            values.push(v * scale * f * noise_factor(rng, 0.5 * sigma));
        }
    }
    HalfHourlySeries::new(standard.start(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn window() -> Window {
        Window::new(NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(), 14)
    }

    #[test]
    fn mean_daily_is_exact() {
        let mut r = rng::stream(1, 0);
        let s = domestic_series(&mut r, window(), ProfileClass::Pc1, 11.0, 0.0, &NoiseConfig::default()).unwrap();
        assert!((crate::series::mean_daily_demand(&s).unwrap() - 11.0).abs() < 1e-9);
        assert!(s.values().iter().all(|&v| v > 0.0));
    }

    #[test]
    fn economy_seven_peaks_overnight() {
        let mut r = rng::stream(2, 0);
        let quiet = NoiseConfig {
            half_hourly_sigma: 0.0,
            daily_sigma: 0.0,
            ..NoiseConfig::default()
        };
        let s = domestic_series(&mut r, window(), ProfileClass::Pc2, 16.0, 0.0, &quiet).unwrap();
        let day = &s.values()[..48];
        let night: f64 = day[4..12].iter().sum::<f64>() / 8.0;
        let afternoon: f64 = day[26..34].iter().sum::<f64>() / 8.0;
        assert!(night > 2.0 * afternoon);
    }

    #[test]
    fn solar_lowers_midday() {
        let w = window();
        let quiet = NoiseConfig {
            half_hourly_sigma: 0.0,
            daily_sigma: 0.0,
            ..NoiseConfig::default()
        };
        let plain = domestic_series(&mut rng::stream(3, 0), w, ProfileClass::Pc1, 10.0, 0.0, &quiet).unwrap();
        let solar = domestic_series(&mut rng::stream(3, 0), w, ProfileClass::Pc1, 10.0, 0.4, &quiet).unwrap();
        assert!(solar.allows_negative());
        assert!(solar.values()[25] < plain.values()[25]);
        assert_eq!(solar.values()[2], plain.values()[2]);
    }
}

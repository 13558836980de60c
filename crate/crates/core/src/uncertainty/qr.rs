//! Per-half-hour linear quantile regression with a trend, weekend dummies and
//! an annual Fourier series:
//!
//! ```text
//! L(d) = a0 + a1 d + a2 Sat(d) + a3 Sun(d) + sum_{p=1..P} b_p sin(2 pi p d / 365) + c_p cos(2 pi p d / 365)
//! ```
//!
//! `d` counts days from 1 at `day_origin`. Each half-hour is fitted
//! independently by minimising the pinball loss with an exact simplex method
//! on the primal: iterates are vertices where `p` observations have zero
//! residual, and each pivot moves along an edge of strictly negative
//! directional derivative to the best breakpoint, so the objective strictly
//! decreases and the method terminates at a global minimiser.

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pinball, ConfidenceBands};
use crate::error::{Error, Result};
use crate::series::{HalfHourlySeries, Window, SLOTS_PER_DAY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QrConfig {
    /// Fourier order `P`.
    pub fourier_order: usize,
    pub lower_tau: f64,
    pub upper_tau: f64,
}

impl Default for QrConfig {
    fn default() -> Self {
        QrConfig {
            fourier_order: 3,
            lower_tau: 0.1,
            upper_tau: 0.9,
        }
    }
}

/// Fitted coefficients for one quantile level, one set per half-hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileModel {
    pub tau: f64,
    pub fourier_order: usize,
    /// Date with `d = 1`.
    pub day_origin: NaiveDate,
    pub training: Window,
    /// `coefficients[h]` is `[a0, a1, a2, a3, b1, c1, ..., bP, cP]`.
    pub coefficients: Vec<Vec<f64>>,
    /// Training pinball loss per half-hour.
    pub objective: Vec<f64>,
}

/// Number of coefficients for Fourier order `p`.
pub fn n_coefficients(fourier_order: usize) -> usize {
    4 + 2 * fourier_order
}

/// Regressor row for `date`.
pub fn design_row(date: NaiveDate, day_origin: NaiveDate, fourier_order: usize) -> Vec<f64> {
    let d = (date - day_origin).num_days() as f64 + 1.0;
    let mut row = Vec::with_capacity(n_coefficients(fourier_order));
    row.push(1.0);
    row.push(d);
    row.push(if date.weekday() == Weekday::Sat { 1.0 } else { 0.0 });
    row.push(if date.weekday() == Weekday::Sun { 1.0 } else { 0.0 });
    for p in 1..=fourier_order {
        let angle = 2.0 * std::f64::consts::PI * p as f64 * d / 365.0;
        row.push(angle.sin());
        row.push(angle.cos());
    }
    row
}

impl QuantileModel {
    pub fn predict(&self, date: NaiveDate, half_hour: usize) -> f64 {
        let x = design_row(date, self.day_origin, self.fourier_order);
        dot(&x, &self.coefficients[half_hour])
    }

    /// Predictions over `window`, slot by slot.
    pub fn predict_window(&self, window: Window) -> Vec<f64> {
        let mut out = Vec::with_capacity(window.slots());
        for date in window.dates() {
            let x = design_row(date, self.day_origin, self.fourier_order);
            out.extend(self.coefficients.iter().map(|c| dot(&x, c)));
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits the `tau` quantile of `series` over the `training` window.
pub fn fit_quantile_model(
    series: &HalfHourlySeries,
    training: Window,
    day_origin: NaiveDate,
    tau: f64,
    fourier_order: usize,
) -> Result<QuantileModel> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::config(format!("tau = {tau} must lie strictly within (0, 1)")));
    }
    if training.days < 14 {
        return Err(Error::domain(format!(
            "quantile regression needs at least 2 weeks of training data, got {} days",
            training.days
        )));
    }
    let values = series.view(training)?;
    let p = n_coefficients(fourier_order);
    let rows: Vec<Vec<f64>> = training
        .dates()
        .map(|d| design_row(d, day_origin, fourier_order))
        .collect();
    let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
    let fits = (0..SLOTS_PER_DAY)
        .into_par_iter()
        .map(|h| {
            let y: Vec<f64> = (0..training.days).map(|d| values[d * SLOTS_PER_DAY + h]).collect();
            solve(&x, &y, tau).map_err(|e| match e {
                Error::RankDeficient(msg) => Error::RankDeficient(format!(
                    "half-hour {h}: {msg}; lower the Fourier order (P = {fourier_order}) or lengthen the training window"
                )),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (coefficients, objective) = fits.into_iter().unzip();
    Ok(QuantileModel {
        tau,
        fourier_order,
        day_origin,
        training,
        coefficients,
        objective,
    })
}

/// Evaluates both models over `window` and repairs any crossing slots.
pub fn predict_bands(low: &QuantileModel, high: &QuantileModel, window: Window) -> Result<ConfidenceBands> {
    if low.fourier_order != high.fourier_order || low.day_origin != high.day_origin {
        return Err(Error::domain(
            "quantile models differ in Fourier order or day origin",
        ));
    }
    if low.tau >= high.tau {
        return Err(Error::domain(format!(
            "lower model tau {} is not below upper model tau {}",
            low.tau, high.tau
        )));
    }
    ConfidenceBands::repaired(
        window.start,
        low.predict_window(window),
        high.predict_window(window),
        true,
        "qr",
    )
}

/// Training pinball loss of `beta`.
pub fn objective(x: &DMatrix<f64>, y: &[f64], beta: &[f64], tau: f64) -> f64 {
    (0..x.nrows())
        .map(|i| {
            let fit: f64 = (0..x.ncols()).map(|j| x[(i, j)] * beta[j]).sum();
            pinball(y[i] - fit, tau)
        })
        .sum()
}

/// Minimises `sum_i pinball(y_i - x_i' beta, tau)`; returns `(beta, objective)`.
pub fn solve(x: &DMatrix<f64>, y: &[f64], tau: f64) -> Result<(Vec<f64>, f64)> {
    let (n, p) = x.shape();
    if n < p {
        return Err(Error::RankDeficient(format!("{n} observations for {p} coefficients")));
    }
    let mut basis = initial_basis(x)?;
    let y_scale = y.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let zero_tol = 1e-11 * y_scale;
    let max_pivots = 50 * n + 1000;

    for _ in 0..max_pivots {
        let xh = DMatrix::from_fn(p, p, |r, c| x[(basis[r], c)]);
        let lu = xh.lu();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Numerical("basis matrix became singular".into()))?;
        let yh = DVector::from_fn(p, |r, _| y[basis[r]]);
        let beta = &inv * yh;
        let fitted = x * &beta;
        let resid: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
        // z[(i, k)] is the change in x_i' beta per unit step along basis direction k
        let z = x * &inv;
        let mut in_basis = vec![false; n];
        for &b in &basis {
            in_basis[b] = true;
        }

        // steepest edge among the 2p directions
        let mut best: Option<(f64, usize, f64)> = None;
        for k in 0..p {
            for s in [1.0, -1.0] {
                let mut slope = if s > 0.0 { 1.0 - tau } else { tau };
                let mut scale = 1.0;
                for i in 0..n {
                    if in_basis[i] {
                        continue;
                    }
                    let zi = s * z[(i, k)];
                    scale += zi.abs();
                    slope += if resid[i] > zero_tol {
                        -tau * zi
                    } else if resid[i] < -zero_tol || zi > 0.0 {
                        (1.0 - tau) * zi
                    } else {
                        -tau * zi
                    };
                }
                if slope < -1e-12 * scale && best.is_none_or(|b| slope < b.0) {
                    best = Some((slope, k, s));
                }
            }
        }
        let Some((slope0, k, s)) = best else {
            let beta: Vec<f64> = beta.iter().copied().collect();
            let obj = objective(x, y, &beta, tau);
            return Ok((beta, obj));
        };

        // breakpoints where a non-basis residual reaches zero
        let mut breaks: Vec<(f64, f64, usize)> = (0..n)
            .filter(|&i| !in_basis[i])
            .filter_map(|i| {
                let zi = s * z[(i, k)];
                let t = resid[i] / zi;
                (resid[i].abs() > zero_tol && zi.abs() > 1e-14 && t > 0.0).then_some((t, zi.abs(), i))
            })
            .collect();
        breaks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let mut slope = slope0;
        let mut entering = None;
        for &(_, w, i) in &breaks {
            slope += w;
            if slope >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        let entering = entering
            .or_else(|| breaks.last().map(|b| b.2))
            .ok_or_else(|| Error::Numerical("unbounded descent direction in quantile regression".into()))?;
        basis[k] = entering;
    }
    Err(Error::Numerical(format!(
        "quantile regression did not converge within {max_pivots} pivots"
    )))
}

/// Picks `p` linearly independent rows, visiting rows in a spread-out order so
/// that the starting vertex is well conditioned.
fn initial_basis(x: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (n, p) = x.shape();
    let mut order: Vec<usize> = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut step = n.next_power_of_two();
    while step >= 1 {
        let mut i = 0;
        while i < n {
            if !seen[i] {
                seen[i] = true;
                order.push(i);
            }
            i += step;
        }
        step /= 2;
    }
    // modified Gram-Schmidt on the chosen rows
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p);
    let mut basis = Vec::with_capacity(p);
    for i in order {
        let row: Vec<f64> = (0..p).map(|j| x[(i, j)]).collect();
        let norm0 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm0 == 0.0 {
            continue;
        }
        let mut v = row;
        for e in &q {
            let c = dot(&v, e);
            v.iter_mut().zip(e).for_each(|(a, b)| *a -= c * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 * norm0 {
            v.iter_mut().for_each(|a| *a /= norm);
            q.push(v);
            basis.push(i);
            if basis.len() == p {
                return Ok(basis);
            }
        }
    }
    Err(Error::RankDeficient(format!(
        "design matrix has rank {} < {p}",
        basis.len()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Every vertex is an `p`-subset interpolant; the global minimum is attained at one.
    fn brute_force(x: &DMatrix<f64>, y: &[f64], tau: f64) -> f64 {
        let (n, p) = x.shape();
        let mut best = f64::INFINITY;
        let mut idx: Vec<usize> = (0..p).collect();
        loop {
            let xh = DMatrix::from_fn(p, p, |r, c| x[(idx[r], c)]);
            if let Some(inv) = xh.try_inverse() {
                let beta = inv * DVector::from_fn(p, |r, _| y[idx[r]]);
                let b: Vec<f64> = beta.iter().copied().collect();
                best = best.min(objective(x, y, &b, tau));
            }
            // next combination
            let mut i = p;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < n - p + i {
                    idx[i] += 1;
                    for j in i + 1..p {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    #[test]
    fn matches_vertex_enumeration_on_small_problems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..40 {
            let n = 9 + trial % 4;
            let p = 1 + trial % 3;
            let x = DMatrix::from_fn(n, p, |_, j| if j == 0 { 1.0 } else { rng.random_range(-2.0..2.0) });
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let tau = [0.1, 0.5, 0.9, 0.37][trial % 4];
            let (_, obj) = solve(&x, &y, tau).unwrap();
            let oracle = brute_force(&x, &y, tau);
            assert!((obj - oracle).abs() <= 1e-9 * oracle.max(1.0), "trial {trial}: {obj} vs {oracle}");
        }
    }

    #[test]
    fn intercept_only_gives_sample_quantile() {
        let y: Vec<f64> = (1..=10).map(f64::from).collect();
        let x = DMatrix::from_element(10, 1, 1.0);
        // left slope on (8, 9) is -0.5, right slope on (9, 10) is +0.5
        let (beta, _) = solve(&x, &y, 0.85).unwrap();
        assert!((beta[0] - 9.0).abs() < 1e-12);
    }

    #[test]
    fn constant_series_fits_exactly() {
        let d0 = NaiveDate::from_ymd_opt(2014, 9, 1).unwrap();
        let w = Window::new(d0, 28);
        let s = HalfHourlySeries::constant(d0, 28, 0.75).unwrap();
        let m = fit_quantile_model(&s, w, d0, 0.9, 1).unwrap();
        for h in 0..48 {
            assert!((m.predict(d0 + chrono::Days::new(30), h) - 0.75).abs() < 1e-9);
        }
    }

    #[test]
    fn short_window_with_high_order_is_rank_deficient() {
        let d0 = NaiveDate::from_ymd_opt(2014, 9, 1).unwrap();
        let s = HalfHourlySeries::constant(d0, 14, 1.0).unwrap();
        let err = fit_quantile_model(&s, Window::new(d0, 14), d0, 0.5, 6).unwrap_err();
        assert!(matches!(err, Error::RankDeficient(_)), "{err}");
        assert!(err.to_string().contains("lower the Fourier order"));
    }

    #[test]
    fn weekend_dummies_shift_predictions() {
        let d0 = NaiveDate::from_ymd_opt(2015, 1, 5).unwrap(); // Monday
        let m = QuantileModel {
            tau: 0.5,
            fourier_order: 0,
            day_origin: d0,
            training: Window::new(d0, 14),
            coefficients: vec![vec![1.0, 0.0, 0.25, -0.5]; 48],
            objective: vec![0.0; 48],
        };
        let sat = d0 + chrono::Days::new(5);
        assert_eq!(m.predict(sat, 10) - m.predict(d0, 10), 0.25);
    }
}

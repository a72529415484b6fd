//! Brute-force references for testing: central finite differences and
//! exhaustive phase and position searches.
//!
//! None of these call the analytic gradient; they only evaluate the
//! objective. Exhaustive searches keep the first strict improvement in
//! lexicographic enumeration order, so ties resolve to the lowest index.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::objective::Surrogate;

/// Largest number of points an exhaustive search may visit.
pub const SEARCH_LIMIT: u128 = 10_000_000;

/// Floor on the relative-error denominator.
pub const REL_ERROR_FLOOR: f64 = 1e-9;

/// Agreement between an analytic and a numerical gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Coordinate with the largest relative error, numbered `Re w_0..`,
    /// then `Im w_0..`, then `p_0..`.
    pub worst_coordinate: usize,
    pub samples: usize,
}

impl OracleReport {
    /// Every coordinate is within `rel` relative error or `abs` absolute
    /// error.
    pub fn within(&self, rel: f64, abs: f64) -> bool {
        self.max_rel_error <= rel || self.max_abs_error <= abs
    }

    /// Folds another comparison into this one.
    pub fn merge(&self, other: &OracleReport) -> OracleReport {
        let (max_rel_error, worst_coordinate) = if other.max_rel_error > self.max_rel_error {
            (other.max_rel_error, other.worst_coordinate)
        } else {
            (self.max_rel_error, self.worst_coordinate)
        };
        OracleReport {
            max_rel_error,
            max_abs_error: self.max_abs_error.max(other.max_abs_error),
            worst_coordinate,
            samples: self.samples + other.samples,
        }
    }
}

/// Central differences of `objective` over all `3L` real coordinates,
/// packed as `(d/d Re w + j d/d Im w, d/dp)`.
pub fn finite_difference_gradient<F>(
    objective: F,
    weights: &[Complex64],
    positions: &[f64],
    h: f64,
) -> Result<(Vec<Complex64>, Vec<f64>)>
where
    F: FnMut(&[Complex64], &[f64]) -> Result<f64>,
{
    finite_difference_gradient_split(objective, weights, positions, h, h)
}

/// [`finite_difference_gradient`] with separate steps for the weight and
/// position coordinates. Positions in meters carry phase rates of
/// `2 pi / lambda`, so a step that suits the unit-modulus weights can leave
/// visible truncation error on the positions.
pub fn finite_difference_gradient_split<F>(
    mut objective: F,
    weights: &[Complex64],
    positions: &[f64],
    h_weights: f64,
    h_positions: f64,
) -> Result<(Vec<Complex64>, Vec<f64>)>
where
    F: FnMut(&[Complex64], &[f64]) -> Result<f64>,
{
    for h in [h_weights, h_positions] {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Config("finite-difference step must be finite and > 0".into()));
        }
    }
    let h = h_weights;
    if weights.len() != positions.len() {
        return Err(Error::LengthMismatch {
            what: "positions",
            expected: weights.len(),
            got: positions.len(),
        });
    }
    let mut eval = |w: &[Complex64], p: &[f64]| -> Result<f64> {
        let v = objective(w, p)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite("objective"))
        }
    };
    let mut w = weights.to_vec();
    let mut p = positions.to_vec();
    let mut gw = Vec::with_capacity(w.len());
    let mut gp = Vec::with_capacity(p.len());
    for l in 0..w.len() {
        let orig = w[l];
        w[l] = orig + h;
        let fp = eval(&w, &p)?;
        w[l] = orig - h;
        let fm = eval(&w, &p)?;
        let re = (fp - fm) / (2.0 * h);
        w[l] = orig + Complex64::new(0.0, h);
        let fp = eval(&w, &p)?;
        w[l] = orig - Complex64::new(0.0, h);
        let fm = eval(&w, &p)?;
        let im = (fp - fm) / (2.0 * h);
        w[l] = orig;
        gw.push(Complex64::new(re, im));
    }
    let h = h_positions;
    for l in 0..p.len() {
        let orig = p[l];
        p[l] = orig + h;
        let fp = eval(&w, &p)?;
        p[l] = orig - h;
        let fm = eval(&w, &p)?;
        p[l] = orig;
        gp.push((fp - fm) / (2.0 * h));
    }
    Ok((gw, gp))
}

/// Coordinate-wise comparison of two packed gradients.
pub fn compare_gradients(
    analytic: (&[Complex64], &[f64]),
    numeric: (&[Complex64], &[f64]),
) -> Result<OracleReport> {
    let flat = |g: (&[Complex64], &[f64])| -> Vec<f64> {
        g.0.iter()
            .map(|z| z.re)
            .chain(g.0.iter().map(|z| z.im))
            .chain(g.1.iter().copied())
            .collect()
    };
    let a = flat(analytic);
    let n = flat(numeric);
    if a.len() != n.len() {
        return Err(Error::LengthMismatch {
            what: "gradient",
            expected: a.len(),
            got: n.len(),
        });
    }
    let mut report = OracleReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_coordinate: 0,
        samples: a.len(),
    };
    for (k, (x, y)) in a.iter().zip(&n).enumerate() {
        let abs = (x - y).abs();
        let rel = abs / y.abs().max(REL_ERROR_FLOOR);
        if !(abs.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_coordinate = k;
        }
    }
    Ok(report)
}

/// `e^{j 2 pi q / Q}` for `q = 0..Q`.
pub fn phase_grid(levels: usize) -> Vec<Complex64> {
    (0..levels)
        .map(|q| Complex64::cis(2.0 * PI * q as f64 / levels as f64))
        .collect()
}

fn guard(size: Option<u128>) -> Result<u128> {
    match size {
        Some(s) if s <= SEARCH_LIMIT => Ok(s),
        Some(s) => Err(Error::SearchSpace {
            size: s,
            limit: SEARCH_LIMIT,
        }),
        None => Err(Error::SearchSpace {
            size: u128::MAX,
            limit: SEARCH_LIMIT,
        }),
    }
}

/// Exhaustive minimization of the surrogate over `w_l` in the `Q`-level
/// phase grid with `positions` fixed. Points where the surrogate is
/// degenerate are skipped.
pub fn brute_force_ab(surrogate: &Surrogate<'_>, positions: &[f64], levels: usize) -> Result<(Vec<Complex64>, f64)> {
    let l = positions.len();
    if l == 0 || levels == 0 {
        return Err(Error::EmptyInput);
    }
    let size = (0..l).try_fold(1u128, |acc, _| acc.checked_mul(levels as u128));
    guard(size)?;
    let grid = phase_grid(levels);
    let mut digits = alloc::vec![0usize; l];
    let mut w: Vec<Complex64> = alloc::vec![grid[0]; l];
    let mut best: Option<(Vec<Complex64>, f64)> = None;
    loop {
        match surrogate.value(&w, positions) {
            Ok(v) if best.as_ref().is_none_or(|(_, b)| v < *b) => best = Some((w.clone(), v)),
            Ok(_) | Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
        // Odometer increment, last digit fastest.
        let mut k = l;
        loop {
            if k == 0 {
                return best.ok_or(Error::Degenerate(0.0));
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] < levels {
                w[k] = grid[digits[k]];
                break;
            }
            digits[k] = 0;
            w[k] = grid[0];
        }
    }
}

/// Exhaustive minimization of the surrogate over two-antenna placements on
/// the grid `{0, step, 2 step, ...} within [0, D]` with `weights` fixed.
/// Only pairs at least half a wavelength apart are visited.
pub fn brute_force_positions(surrogate: &Surrogate<'_>, weights: &[Complex64], step: f64) -> Result<(Vec<f64>, f64)> {
    if weights.len() != 2 {
        return Err(Error::LengthMismatch {
            what: "weights",
            expected: 2,
            got: weights.len(),
        });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config("grid step must be finite and > 0".into()));
    }
    let aperture = surrogate.geometry.aperture;
    let min_gap = 0.5 * surrogate.geometry.wavelength;
    let slack = 1e-12 * aperture.max(step);
    let count = guard(Some(((aperture + slack) / step).floor() as u128 + 1))?;
    guard(count.checked_mul(count))?;
    let grid: Vec<f64> = (0..count as usize).map(|k| k as f64 * step).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for (i, &a) in grid.iter().enumerate() {
        for &b in &grid[i..] {
            if b - a < min_gap - slack {
                continue;
            }
            let p = [a, b];
            match surrogate.value(weights, &p) {
                Ok(v) if best.as_ref().is_none_or(|(_, s)| v < *s) => best = Some((p.to_vec(), v)),
                Ok(_) | Err(Error::Degenerate(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }
    best.ok_or_else(|| Error::Config("no feasible position pair on the grid".into()))
}

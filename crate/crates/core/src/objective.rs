//! Multicast secrecy rate and the smoothed, penalized surrogate minimized by
//! the solvers.
//!
//! With `c_i = 1 + t_i |h_i(p)^H w|^2`, the surrogate is
//!
//! ```text
//! phi(w, p) = u_e / u_b + penalty(p)
//! u_e =  alpha ln sum_e exp( c_e / alpha)     (>= max_e c_e)
//! u_b = -alpha ln sum_b exp(-c_b / alpha)     (<= min_b c_b)
//! ```
//!
//! and `penalty(p) = rho gamma sum_k softplus(g_k(p) / gamma)` over the
//! spacing constraints `p_l - p_{l+1} + lambda/2 <= 0` and the aperture
//! constraints `-p_1 <= 0`, `p_L - D <= 0`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::channel::{field_response, field_response_with_derivative, ChannelRealization, UserChannel};
use crate::error::{Error, Result};

/// Unit-modulus tolerance of [`BeamformerPoint::new`].
pub const UNIT_MODULUS_TOL: f64 = 1e-9;

/// Wavelength and movement-region length, the two numbers every
/// constraint needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Geometry {
    pub wavelength: f64,
    pub aperture: f64,
}

/// Analog weights and antenna positions.
///
/// Only the constant-modulus property is enforced; positions may violate the
/// spacing and aperture constraints, which the penalty method relies on.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerPoint {
    pub weights: Vec<Complex64>,
    pub positions: Vec<f64>,
}

impl BeamformerPoint {
    pub fn new(weights: Vec<Complex64>, positions: Vec<f64>) -> Result<Self> {
        if weights.len() != positions.len() {
            return Err(Error::LengthMismatch {
                what: "beamformer point",
                expected: positions.len(),
                got: weights.len(),
            });
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("antenna positions"));
        }
        if let Some(i) = weights
            .iter()
            .position(|w| !((w.norm() - 1.0).abs() <= UNIT_MODULUS_TOL))
        {
            return Err(Error::Config(alloc::format!(
                "weight {i} has modulus {} (must be 1)",
                weights[i].norm()
            )));
        }
        Ok(Self { weights, positions })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `max_l | |w_l| - 1 |`.
    pub fn modulus_error(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| (w.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Log-sum-exp constant, penalty smoothing width and penalty weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub lse_alpha: f64,
    /// Softplus width, meters.
    pub penalty_gamma: f64,
    pub penalty_rho: f64,
}

impl SmoothingParams {
    pub fn new(lse_alpha: f64, penalty_gamma: f64, penalty_rho: f64) -> Result<Self> {
        let p = Self {
            lse_alpha,
            penalty_gamma,
            penalty_rho,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.lse_alpha),
            ("gamma", self.penalty_gamma),
            ("rho", self.penalty_rho),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(alloc::format!("{name} must be finite and > 0 (got {v})")));
            }
        }
        Ok(())
    }
}

/// `alpha ln sum_k exp(c_k / alpha)`, evaluated with the maximum factored
/// out so that no exponent exceeds zero.
pub fn log_sum_exp(values: &[f64], alpha: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) || !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::NonFinite("log-sum-exp input"));
    }
    let out = lse_unchecked(values, alpha);
    debug_assert!({
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out >= max && out <= max + alpha * (values.len() as f64).ln() * (1.0 + 1e-12) + 1e-12 * max.abs()
    });
    Ok(out)
}

fn lse_unchecked(values: &[f64], alpha: f64) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = values.iter().map(|&v| ((v - max) / alpha).exp()).sum();
    // sum >= 1 because the maximal term contributes exp(0).
    max + alpha * sum.ln()
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function `1 / (1 + e^-x)`, the derivative of [`softplus`].
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One smoothed penalty term `rho gamma ln(1 + e^{g / gamma})`.
pub fn softplus_penalty(g: f64, gamma: f64, rho: f64) -> f64 {
    rho * gamma * softplus(g / gamma)
}

/// Constraint functions in order `g_1..g_{L-1}, f_1, f_2`; feasible iff all
/// are `<= 0`.
pub fn constraint_values(positions: &[f64], geometry: &Geometry) -> Vec<f64> {
    let half = 0.5 * geometry.wavelength;
    let mut out: Vec<f64> = positions.windows(2).map(|w| w[0] - w[1] + half).collect();
    if let (Some(&first), Some(&last)) = (positions.first(), positions.last()) {
        out.push(-first);
        out.push(last - geometry.aperture);
    }
    out
}

/// `max{0, g_l, f_1, f_2}`.
pub fn constraint_violation(positions: &[f64], geometry: &Geometry) -> f64 {
    constraint_values(positions, geometry)
        .into_iter()
        .fold(0.0, f64::max)
}

/// Smoothed exterior penalty: `L + 1` softplus terms.
pub fn penalty_value(positions: &[f64], params: &SmoothingParams, geometry: &Geometry) -> f64 {
    constraint_values(positions, geometry)
        .into_iter()
        .map(|g| softplus_penalty(g, params.penalty_gamma, params.penalty_rho))
        .sum()
}

/// Adds the penalty gradient to `grad`.
fn add_penalty_gradient(positions: &[f64], params: &SmoothingParams, geometry: &Geometry, grad: &mut [f64]) {
    let (gamma, rho) = (params.penalty_gamma, params.penalty_rho);
    let half = 0.5 * geometry.wavelength;
    let n = positions.len();
    for l in 0..n.saturating_sub(1) {
        let s = rho * logistic((positions[l] - positions[l + 1] + half) / gamma);
        grad[l] += s;
        grad[l + 1] -= s;
    }
    if n > 0 {
        grad[0] -= rho * logistic(-positions[0] / gamma);
        grad[n - 1] += rho * logistic((positions[n - 1] - geometry.aperture) / gamma);
    }
}

/// `|h^H w|^2`.
fn beam_gain(h: &[Complex64], w: &[Complex64]) -> f64 {
    h.iter().zip(w).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm_sqr()
}

/// `log2(1 + t |h(p)^H w|^2)` for every LU and every EVE.
pub fn user_rates(weights: &[Complex64], positions: &[f64], channels: &ChannelRealization) -> (Vec<f64>, Vec<f64>) {
    let rate = |u: &UserChannel| {
        let h = field_response(positions, u, channels.wavelength);
        (u.snr_scale * beam_gain(&h, weights)).ln_1p() / core::f64::consts::LN_2
    };
    (
        channels.lus.iter().map(rate).collect(),
        channels.eves.iter().map(rate).collect(),
    )
}

/// `[min_b R_b - max_e R_e]^+` in bits per channel use.
///
/// Accepts any weight vector, so fully digital baselines are scored by the
/// same routine.
pub fn multicast_secrecy_rate(weights: &[Complex64], positions: &[f64], channels: &ChannelRealization) -> f64 {
    let (lu, eve) = user_rates(weights, positions, channels);
    let worst_lu = lu.iter().copied().fold(f64::INFINITY, f64::min);
    let best_eve = eve.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (worst_lu - best_eve).max(0.0)
}

/// Surrogate objective bound to one channel realization.
#[derive(Debug, Clone, Copy)]
pub struct Surrogate<'a> {
    pub channels: &'a ChannelRealization,
    pub params: SmoothingParams,
    pub geometry: Geometry,
}

/// Value and Euclidean gradient of the surrogate.
///
/// `weights` holds `d phi / d Re w + j d phi / d Im w`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub weights: Vec<Complex64>,
    pub positions: Vec<f64>,
}

impl<'a> Surrogate<'a> {
    pub fn new(channels: &'a ChannelRealization, params: SmoothingParams, geometry: Geometry) -> Self {
        Self {
            channels,
            params,
            geometry,
        }
    }

    fn user_terms(&self, users: &[UserChannel], w: &[Complex64], p: &[f64]) -> Vec<f64> {
        users
            .iter()
            .map(|u| 1.0 + u.snr_scale * beam_gain(&field_response(p, u, self.channels.wavelength), w))
            .collect()
    }

    /// `(u_e, u_b)`.
    fn smoothed_extremes(&self, eve_terms: &[f64], lu_terms: &[f64]) -> Result<(f64, f64)> {
        let alpha = self.params.lse_alpha;
        let u_e = lse_unchecked(eve_terms, alpha);
        let neg: Vec<f64> = lu_terms.iter().map(|c| -c).collect();
        let u_b = -lse_unchecked(&neg, alpha);
        if !(u_b > 1e-12) {
            return Err(Error::Degenerate(u_b));
        }
        Ok((u_e, u_b))
    }

    /// The log-sum-exp ratio `u_e / u_b` alone.
    pub fn ratio(&self, w: &[Complex64], p: &[f64]) -> Result<f64> {
        let eve = self.user_terms(&self.channels.eves, w, p);
        let lu = self.user_terms(&self.channels.lus, w, p);
        let (u_e, u_b) = self.smoothed_extremes(&eve, &lu)?;
        Ok(u_e / u_b)
    }

    pub fn penalty(&self, p: &[f64]) -> f64 {
        penalty_value(p, &self.params, &self.geometry)
    }

    pub fn value(&self, w: &[Complex64], p: &[f64]) -> Result<f64> {
        Ok(self.ratio(w, p)? + self.penalty(p))
    }

    /// Value and full Euclidean gradient.
    pub fn evaluate(&self, w: &[Complex64], p: &[f64]) -> Result<Evaluation> {
        let lambda = self.channels.wavelength;
        let n = p.len();
        let alpha = self.params.lse_alpha;
        let collect = |users: &[UserChannel]| -> Vec<(f64, Complex64, Vec<Complex64>, Vec<Complex64>)> {
            users
                .iter()
                .map(|u| {
                    let (h, dh) = field_response_with_derivative(p, u, lambda);
                    let s: Complex64 = h.iter().zip(w).map(|(a, b)| a.conj() * b).sum();
                    (1.0 + u.snr_scale * s.norm_sqr(), s, h, dh)
                })
                .collect()
        };
        let eves = collect(&self.channels.eves);
        let lus = collect(&self.channels.lus);
        let eve_terms: Vec<f64> = eves.iter().map(|e| e.0).collect();
        let lu_terms: Vec<f64> = lus.iter().map(|b| b.0).collect();
        let (u_e, u_b) = self.smoothed_extremes(&eve_terms, &lu_terms)?;

        // d(u_e)/d(c_e) and d(u_b)/d(c_b) are softmax weights.
        let max_e = eve_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_b = lu_terms.iter().copied().fold(f64::INFINITY, f64::min);
        let pe: Vec<f64> = eve_terms.iter().map(|c| ((c - max_e) / alpha).exp()).collect();
        let pb: Vec<f64> = lu_terms.iter().map(|c| (-(c - min_b) / alpha).exp()).collect();
        let (se, sb): (f64, f64) = (pe.iter().sum(), pb.iter().sum());

        let mut gw = vec![Complex64::new(0.0, 0.0); n];
        let mut gp = vec![0.0; n];
        let mut accumulate = |coef: f64, t: f64, s: Complex64, h: &[Complex64], dh: &[Complex64]| {
            let c = coef * t * 2.0;
            for l in 0..n {
                gw[l] += h[l] * s * c;
                gp[l] += c * (s.conj() * dh[l].conj() * w[l]).re;
            }
        };
        let inv_b = 1.0 / u_b;
        let ratio_b = -u_e / (u_b * u_b);
        for ((_, s, h, dh), (weight, user)) in eves.iter().zip(pe.iter().zip(&self.channels.eves)) {
            accumulate(weight / se * inv_b, user.snr_scale, *s, h, dh);
        }
        for ((_, s, h, dh), (weight, user)) in lus.iter().zip(pb.iter().zip(&self.channels.lus)) {
            accumulate(weight / sb * ratio_b, user.snr_scale, *s, h, dh);
        }
        add_penalty_gradient(p, &self.params, &self.geometry, &mut gp);
        Ok(Evaluation {
            value: u_e / u_b + self.penalty(p),
            weights: gw,
            positions: gp,
        })
    }
}

/// Surrogate value `u_e / u_b + penalty` at `point`.
pub fn smoothed_objective(
    point: &BeamformerPoint,
    channels: &ChannelRealization,
    params: &SmoothingParams,
    geometry: &Geometry,
) -> Result<f64> {
    Surrogate::new(channels, *params, *geometry).value(&point.weights, &point.positions)
}

/// Euclidean gradient `(grad_w, grad_p)` of the surrogate at `point`.
pub fn euclidean_gradient(
    point: &BeamformerPoint,
    channels: &ChannelRealization,
    params: &SmoothingParams,
    geometry: &Geometry,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    let e = Surrogate::new(channels, *params, *geometry).evaluate(&point.weights, &point.positions)?;
    Ok((e.weights, e.positions))
}

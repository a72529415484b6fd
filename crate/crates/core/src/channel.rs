//! Far-field multi-path channels seen from a linear array of movable
//! antennas.
//!
//! Every user is described by `M_p` departure angles and complex path gains.
//! The channel from the array to that user is the gain-weighted sum of the
//! field-response (steering) vectors `a(p, theta)_l = exp(j 2 pi / lambda
//! p_l cos theta)`, so it can be re-evaluated for any antenna placement `p`.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{self, EVE_STREAM_OFFSET};
use crate::scenario::ScenarioConfig;

/// Paths from the array to one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannel {
    /// Departure angles, radians.
    pub angles: Vec<f64>,
    /// Complex path gains, one per angle.
    pub gains: Vec<Complex64>,
    /// Link distance, meters.
    pub distance: f64,
    /// `P / sigma^2` for this receiver.
    pub snr_scale: f64,
}

impl UserChannel {
    pub fn num_paths(&self) -> usize {
        self.angles.len()
    }
}

/// All legitimate-user and eavesdropper channels of one random draw.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub wavelength: f64,
    pub num_paths: usize,
    pub lus: Vec<UserChannel>,
    pub eves: Vec<UserChannel>,
}

impl ChannelRealization {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength.is_finite() && self.wavelength > 0.0) {
            return Err(Error::Config("wavelength must be finite and > 0".into()));
        }
        if self.lus.is_empty() || self.eves.is_empty() {
            return Err(Error::Config(
                "a realization needs at least one LU and one EVE".into(),
            ));
        }
        for u in self.lus.iter().chain(&self.eves) {
            if u.angles.len() != self.num_paths || u.gains.len() != self.num_paths {
                return Err(Error::PathCount {
                    expected: self.num_paths,
                    got: u.angles.len().min(u.gains.len()),
                });
            }
            if !(u.snr_scale > 0.0 && u.snr_scale.is_finite()) {
                return Err(Error::Config("SNR scale must be finite and > 0".into()));
            }
        }
        Ok(())
    }

    /// Channel vector `h(p)` of `user`, checked against the path count.
    pub fn channel_vector(&self, positions: &[f64], user: &UserChannel) -> Result<Vec<Complex64>> {
        if user.angles.len() != self.num_paths || user.gains.len() != self.num_paths {
            return Err(Error::PathCount {
                expected: self.num_paths,
                got: user.angles.len().min(user.gains.len()),
            });
        }
        Ok(field_response(positions, user, self.wavelength))
    }

    /// Rescales every receiver's SNR factor, e.g. after a power change.
    pub fn with_snr_scales(mut self, lu: f64, eve: f64) -> Self {
        self.lus.iter_mut().for_each(|u| u.snr_scale = lu);
        self.eves.iter_mut().for_each(|u| u.snr_scale = eve);
        self
    }
}

/// Angle-of-departure and gain estimation errors.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CsiErrorParams {
    /// Maximum AoD error `nu`; errors are uniform on `[-nu/2, nu/2]`.
    pub max_aod_error: f64,
    /// Variance `chi` of the normalized gain error.
    pub gain_error_variance: f64,
}

impl CsiErrorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_aod_error >= 0.0 && self.max_aod_error.is_finite()) {
            return Err(Error::Config("maximum AoD error must be >= 0".into()));
        }
        if !(self.gain_error_variance >= 0.0 && self.gain_error_variance.is_finite()) {
            return Err(Error::Config("gain error variance must be >= 0".into()));
        }
        Ok(())
    }
}

fn sample_user(config: &ScenarioConfig, seed: u64, stream: u64, angles: (f64, f64), snr_scale: f64) -> UserChannel {
    let mut rng = rng::stream(seed, stream);
    let distance = rng::uniform(&mut rng, config.distance_min, config.distance_max);
    let variance =
        config.ref_gain * distance.powf(-config.pathloss_exponent) / config.num_paths as f64;
    let mut user = UserChannel {
        angles: Vec::with_capacity(config.num_paths),
        gains: Vec::with_capacity(config.num_paths),
        distance,
        snr_scale,
    };
    for _ in 0..config.num_paths {
        user.angles.push(rng::uniform(&mut rng, angles.0, angles.1));
        user.gains.push(rng::complex_normal(&mut rng, variance));
    }
    user
}

/// Draws distances `U[d_min, d_max]`, departure angles uniform on the
/// configured interval and CN(0, g0 d^-alpha / M_p) path gains.
///
/// LU `b` uses substream `b`, EVE `e` substream `2^32 + e`, so adding users
/// leaves the existing ones unchanged.
pub fn sample_channels(config: &ScenarioConfig, seed: u64) -> Result<ChannelRealization> {
    config.validate()?;
    let lu_t = config.lu_snr_scale();
    let eve_t = config.eve_snr_scale();
    let lus = (0..config.num_lus)
        .map(|b| sample_user(config, seed, b as u64, config.lu_angles, lu_t))
        .collect();
    let eves = (0..config.num_eves)
        .map(|e| sample_user(config, seed, EVE_STREAM_OFFSET + e as u64, config.eve_angles, eve_t))
        .collect();
    Ok(ChannelRealization {
        wavelength: config.wavelength,
        num_paths: config.num_paths,
        lus,
        eves,
    })
}

/// Field-response vector `exp(j 2 pi / lambda p_l cos theta)`.
pub fn steering_vector(positions: &[f64], angle: f64, wavelength: f64) -> Result<Vec<Complex64>> {
    if !angle.is_finite() || !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::NonFinite("steering angle or wavelength"));
    }
    if positions.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("antenna positions"));
    }
    let k = 2.0 * PI / wavelength * angle.cos();
    Ok(positions.iter().map(|&p| Complex64::cis(k * p)).collect())
}

/// `h(p) = sum_m beta_m a(p, theta_m)` without the path-count check.
pub fn field_response(positions: &[f64], user: &UserChannel, wavelength: f64) -> Vec<Complex64> {
    let k0 = 2.0 * PI / wavelength;
    let mut h = alloc::vec![Complex64::new(0.0, 0.0); positions.len()];
    for (&theta, &beta) in user.angles.iter().zip(&user.gains) {
        let k = k0 * theta.cos();
        for (hl, &p) in h.iter_mut().zip(positions) {
            *hl += beta * Complex64::cis(k * p);
        }
    }
    h
}

/// `h(p)` together with the elementwise derivative `dh_l / dp_l`.
pub fn field_response_with_derivative(
    positions: &[f64],
    user: &UserChannel,
    wavelength: f64,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let k0 = 2.0 * PI / wavelength;
    let zero = Complex64::new(0.0, 0.0);
    let mut h = alloc::vec![zero; positions.len()];
    let mut dh = alloc::vec![zero; positions.len()];
    for (&theta, &beta) in user.angles.iter().zip(&user.gains) {
        let k = k0 * theta.cos();
        for ((hl, dl), &p) in h.iter_mut().zip(dh.iter_mut()).zip(positions) {
            let term = beta * Complex64::cis(k * p);
            *hl += term;
            *dl += term * Complex64::new(0.0, k);
        }
    }
    (h, dh)
}

/// Free-standing variant of [`ChannelRealization::channel_vector`].
pub fn channel_vector(positions: &[f64], user: &UserChannel, wavelength: f64) -> Result<Vec<Complex64>> {
    if user.angles.len() != user.gains.len() {
        return Err(Error::PathCount {
            expected: user.angles.len(),
            got: user.gains.len(),
        });
    }
    Ok(field_response(positions, user, wavelength))
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|x^H y|`.
pub fn inner_abs(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm()
}

/// Worst-case normalized correlation `max_{b,e} |g_e^H h_b| / (|g_e| |h_b|)`.
///
/// Pairs involving a zero channel vector are skipped.
pub fn channel_correlation(channels: &ChannelRealization, positions: &[f64]) -> Result<f64> {
    let lus: Vec<_> = channels
        .lus
        .iter()
        .map(|u| field_response(positions, u, channels.wavelength))
        .collect();
    let eves: Vec<_> = channels
        .eves
        .iter()
        .map(|u| field_response(positions, u, channels.wavelength))
        .collect();
    vector_correlation(&lus, &eves)
}

/// Correlation metric over explicit channel vectors.
pub fn vector_correlation(lus: &[Vec<Complex64>], eves: &[Vec<Complex64>]) -> Result<f64> {
    let mut best: Option<f64> = None;
    for h in lus {
        let nh = norm(h);
        if nh == 0.0 {
            continue;
        }
        for g in eves {
            let ng = norm(g);
            if ng == 0.0 {
                continue;
            }
            let rho = (inner_abs(g, h) / (ng * nh)).min(1.0);
            best = Some(best.map_or(rho, |b: f64| b.max(rho)));
        }
    }
    best.ok_or(Error::UndefinedCorrelation)
}

/// Applies estimation errors to every path: `theta_est = theta - u` with
/// `u ~ U[-nu/2, nu/2]`, and `beta_est = beta - |beta| e` with
/// `e ~ CN(0, chi)`.
///
/// Both error draws are taken for every path regardless of `nu` and `chi`,
/// scaled from unit draws, so a sweep over error magnitudes with a fixed seed
/// uses the same underlying noise.
pub fn perturb_csi(channels: &ChannelRealization, err: &CsiErrorParams, seed: u64) -> Result<ChannelRealization> {
    err.validate()?;
    let sd = err.gain_error_variance.sqrt();
    let perturb = |user: &UserChannel, stream: u64| {
        let mut rng = rng::stream(seed, stream);
        let mut out = user.clone();
        for (theta, beta) in out.angles.iter_mut().zip(out.gains.iter_mut()) {
            let u = rng::uniform(&mut rng, -0.5, 0.5) * err.max_aod_error;
            let e = rng::complex_normal(&mut rng, 1.0) * sd;
            *theta -= u;
            *beta -= e * beta.norm();
        }
        out
    };
    let lus = channels
        .lus
        .iter()
        .enumerate()
        .map(|(b, u)| perturb(u, b as u64))
        .collect();
    let eves = channels
        .eves
        .iter()
        .enumerate()
        .map(|(e, u)| perturb(u, EVE_STREAM_OFFSET + e as u64))
        .collect();
    Ok(ChannelRealization {
        wavelength: channels.wavelength,
        num_paths: channels.num_paths,
        lus,
        eves,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    fn user(angles: Vec<f64>, gains: Vec<Complex64>) -> UserChannel {
        UserChannel {
            angles,
            gains,
            distance: 80.0,
            snr_scale: 1.0,
        }
    }

    #[test]
    fn steering_vector_cases() {
        let a = steering_vector(&[0.0, 0.005], PI / 2.0, 0.01).unwrap();
        for z in &a {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-13);
        }
        let a = steering_vector(&[0.0025], 0.0, 0.01).unwrap();
        assert_abs_diff_eq!(a[0].re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[0].im, 1.0, epsilon = 1e-15);
        let a = steering_vector(&[0.0; 3], 1.234, 0.01).unwrap();
        assert_eq!(a, vec![Complex64::new(1.0, 0.0); 3]);
        assert!(steering_vector(&[f64::NAN], 0.1, 0.01).is_err());
        assert!(steering_vector(&[0.0], 0.1, 0.0).is_err());
    }

    #[test]
    fn single_unit_path_is_the_steering_vector() {
        let u = user(vec![PI / 2.0], vec![Complex64::new(1.0, 0.0)]);
        let h = channel_vector(&[0.0, 0.013, 0.2], &u, 0.01).unwrap();
        for z in h {
            assert_abs_diff_eq!(z.re, 1.0, epsilon = 1e-13);
            assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn zero_gains_give_zero_channel() {
        let u = user(vec![0.3, 1.1], vec![Complex64::new(0.0, 0.0); 2]);
        let h = channel_vector(&[0.0, 0.01, 0.03], &u, 0.01).unwrap();
        assert!(h.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn path_count_mismatch() {
        let r = ChannelRealization {
            wavelength: 0.01,
            num_paths: 2,
            lus: vec![user(vec![0.1], vec![Complex64::new(1.0, 0.0)])],
            eves: vec![user(vec![0.1], vec![Complex64::new(1.0, 0.0)])],
        };
        assert_eq!(
            r.channel_vector(&[0.0, 0.1], &r.lus[0]),
            Err(Error::PathCount { expected: 2, got: 1 })
        );
        assert!(r.validate().is_err());
    }

    #[test]
    fn correlation_extremes() {
        let u = user(vec![0.4, 2.0], vec![Complex64::new(1e-5, 2e-5), Complex64::new(-3e-5, 0.0)]);
        let r = ChannelRealization {
            wavelength: 0.01,
            num_paths: 2,
            lus: vec![u.clone()],
            eves: vec![u],
        };
        let rho = channel_correlation(&r, &[0.0, 0.007, 0.02, 0.05]).unwrap();
        assert_abs_diff_eq!(rho, 1.0, epsilon = 1e-12);

        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let g = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        assert_eq!(vector_correlation(&[h], &[g]).unwrap(), 0.0);
    }

    #[test]
    fn correlation_skips_zero_channels() {
        let z = vec![Complex64::new(0.0, 0.0); 2];
        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        assert_eq!(vector_correlation(core::slice::from_ref(&z), core::slice::from_ref(&h)), Err(Error::UndefinedCorrelation));
        let rho = vector_correlation(&[z, h.clone()], &[h]).unwrap();
        assert_abs_diff_eq!(rho, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_error_perturbation_is_identity() {
        let c = ScenarioConfig::paper_default();
        let ch = sample_channels(&c, 3).unwrap();
        let est = perturb_csi(&ch, &CsiErrorParams::default(), 11).unwrap();
        assert_eq!(est, ch);
        assert!(perturb_csi(
            &ch,
            &CsiErrorParams {
                max_aod_error: -1.0,
                gain_error_variance: 0.0
            },
            1
        )
        .is_err());
    }

    #[test]
    fn sampling_shape_and_determinism() {
        let c = ScenarioConfig::paper_default();
        let a = sample_channels(&c, 42).unwrap();
        let b = sample_channels(&c, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.lus.len() + a.eves.len(), 8);
        a.validate().unwrap();
        for u in a.lus.iter().chain(&a.eves) {
            assert_eq!(u.angles.len(), 6);
            assert!(u.distance >= 60.0 && u.distance <= 100.0);
            assert!(u.angles.iter().all(|&t| (0.0..=PI).contains(&t)));
        }
        assert_ne!(a, sample_channels(&c, 43).unwrap());
    }

    #[test]
    fn adding_users_keeps_existing_draws() {
        let mut c = ScenarioConfig::paper_default();
        c.num_lus = 2;
        let small = sample_channels(&c, 5).unwrap();
        c.num_lus = 4;
        let big = sample_channels(&c, 5).unwrap();
        assert_eq!(small.lus[..], big.lus[..2]);
        assert_eq!(small.eves, big.eves);
    }
}

//! Scenario parameters. All quantities are stored in linear SI units; the
//! decibel helpers below are applied once, when a configuration is parsed.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use core::f64::consts::PI;


use crate::error::{Error, Result};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    db_to_linear(dbw)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// One experiment scenario: array geometry, user population, link budget and
/// the log-sum-exp smoothing constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_antennas: usize,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// Length of the movement region `[0, D]` in meters.
    pub aperture: f64,
    pub num_lus: usize,
    pub num_eves: usize,
    pub num_paths: usize,
    /// Total transmit power `P_t` in watts, shared equally by the antennas.
    pub total_power: f64,
    /// Noise variance at every legitimate user, watts.
    pub noise_lu: f64,
    /// Noise variance at every eavesdropper, watts.
    pub noise_eve: f64,
    /// Channel gain at the 1 m reference distance (linear).
    pub ref_gain: f64,
    pub pathloss_exponent: f64,
    pub distance_min: f64,
    pub distance_max: f64,
    /// Log-sum-exp smoothing constant of the surrogate objective.
    pub lse_alpha: f64,
    /// Angle-of-departure sampling interval for legitimate users, radians.
    pub lu_angles: (f64, f64),
    /// Angle-of-departure sampling interval for eavesdroppers, radians.
    pub eve_angles: (f64, f64),
}

impl ScenarioConfig {
    /// Reference simulation setup: 16 antennas, lambda = 1 cm, D = 30 lambda,
    /// four LUs and four EVEs over six paths, 0 dBW, -70 dBm noise,
    /// -40 dB reference gain, path-loss exponent 2.8, users 60-100 m away,
    /// alpha = 1, departure angles uniform on `[0, pi]`.
    pub fn paper_default() -> Self {
        let wavelength = 0.01;
        Self {
            num_antennas: 16,
            wavelength,
            aperture: 30.0 * wavelength,
            num_lus: 4,
            num_eves: 4,
            num_paths: 6,
            total_power: dbw_to_watts(0.0),
            noise_lu: dbm_to_watts(-70.0),
            noise_eve: dbm_to_watts(-70.0),
            ref_gain: db_to_linear(-40.0),
            pathloss_exponent: 2.8,
            distance_min: 60.0,
            distance_max: 100.0,
            lse_alpha: 1.0,
            lu_angles: (0.0, PI),
            eve_angles: (0.0, PI),
        }
    }

    /// Smallest aperture that fits the array at half-wavelength spacing.
    pub fn min_aperture(&self) -> f64 {
        0.5 * self.wavelength * (self.num_antennas.saturating_sub(1)) as f64
    }

    /// Per-antenna power `P = P_t / L`.
    pub fn antenna_power(&self) -> f64 {
        self.total_power / self.num_antennas as f64
    }

    pub fn lu_snr_scale(&self) -> f64 {
        self.antenna_power() / self.noise_lu
    }

    pub fn eve_snr_scale(&self) -> f64 {
        self.antenna_power() / self.noise_eve
    }

    pub fn geometry(&self) -> crate::objective::Geometry {
        crate::objective::Geometry {
            wavelength: self.wavelength,
            aperture: self.aperture,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Config(msg));
        if self.num_antennas < 2 {
            return bad(format!("L must be at least 2 (got {})", self.num_antennas));
        }
        if self.num_lus == 0 {
            return bad("N_b must be positive".into());
        }
        if self.num_eves == 0 {
            return bad("N_e must be positive".into());
        }
        if self.num_paths == 0 {
            return bad("M_p must be positive".into());
        }
        let positive = [
            ("wavelength", self.wavelength),
            ("aperture D", self.aperture),
            ("total power", self.total_power),
            ("LU noise variance", self.noise_lu),
            ("EVE noise variance", self.noise_eve),
            ("reference gain", self.ref_gain),
            ("minimum distance", self.distance_min),
            ("maximum distance", self.distance_max),
            ("alpha", self.lse_alpha),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and > 0 (got {v})"));
            }
        }
        if !self.pathloss_exponent.is_finite() {
            return bad("path-loss exponent must be finite".into());
        }
        if self.distance_min > self.distance_max {
            return bad(format!(
                "distance bounds reversed: d_min = {} > d_max = {}",
                self.distance_min, self.distance_max
            ));
        }
        for (name, (lo, hi)) in [("LU angles", self.lu_angles), ("EVE angles", self.eve_angles)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("{name} interval [{lo}, {hi}] is invalid"));
            }
        }
        // Small relative slack so that D = (lambda/2)(L-1) written in decimal
        // is not rejected by rounding.
        if self.aperture < self.min_aperture() * (1.0 - 1e-12) {
            return Err(Error::InfeasibleGeometry {
                aperture: self.aperture,
                antennas: self.num_antennas,
                half_wavelength: 0.5 * self.wavelength,
            });
        }
        Ok(())
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::paper_default()
    }
}

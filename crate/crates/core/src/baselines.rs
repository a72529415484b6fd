//! Comparison schemes: fixed uniform arrays, random placements, fully
//! digital beamforming and greedy antenna selection.
//!
//! Fully digital (FDB) weights are kept on the power sphere `||w||^2 = L`,
//! the total power of a constant-modulus vector, and are optimized with the
//! same surrogate, line search and outer schedule as the proposed scheme.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::manifold::WeightSpace;
use crate::objective::{constraint_violation, multicast_secrecy_rate, user_rates, BeamformerPoint, SmoothingParams, Surrogate};
use crate::optimizer::{
    self, matched_filter, pcpm_from, select_start, ConvergenceTrace, LineSearchParams, PcpmSchedule, PositionMode, Problem,
};
use crate::rng;
use crate::scenario::ScenarioConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    /// Joint constant-modulus weights and movable positions (PCPM).
    ProposedMaAb,
    /// Fully digital weights with movable antennas.
    MaFdbGd,
    /// Fully digital weights on greedily selected half-wavelength grid
    /// points.
    FpaFdbSs,
    /// `MaFdbGd` projected onto the unit circle.
    MaAbGd,
    /// Fully digital weights on a fixed half-wavelength array.
    FpaFdbUla,
    /// Constant-modulus weights on a fixed half-wavelength array.
    FpaAbUla,
    /// Constant-modulus weights on random feasible positions.
    MaAbR,
}

impl SchemeId {
    pub const ALL: [SchemeId; 7] = [
        SchemeId::ProposedMaAb,
        SchemeId::MaFdbGd,
        SchemeId::FpaFdbSs,
        SchemeId::MaAbGd,
        SchemeId::FpaFdbUla,
        SchemeId::FpaAbUla,
        SchemeId::MaAbR,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            SchemeId::ProposedMaAb => "PROPOSED_MA_AB",
            SchemeId::MaFdbGd => "MA_FDB_GD",
            SchemeId::FpaFdbSs => "FPA_FDB_SS",
            SchemeId::MaAbGd => "MA_AB_GD",
            SchemeId::FpaFdbUla => "FPA_FDB_ULA",
            SchemeId::FpaAbUla => "FPA_AB_ULA",
            SchemeId::MaAbR => "MA_AB_R",
        }
    }

    pub fn is_fully_digital(&self) -> bool {
        matches!(self, SchemeId::MaFdbGd | SchemeId::FpaFdbSs | SchemeId::FpaFdbUla)
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|s| s == self).unwrap_or(0)
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: alloc::string::String = s
            .trim()
            .chars()
            .map(|c| if c == '-' { '_' } else { c.to_ascii_uppercase() })
            .collect();
        let norm = if norm == "PROPOSED" { "PROPOSED_MA_AB".into() } else { norm };
        Self::ALL
            .iter()
            .copied()
            .find(|id| id.tag() == norm)
            .ok_or_else(|| Error::Config(alloc::format!("unknown scheme `{}`", s.trim())))
    }
}

/// The sphere `||w||^2 = power`.
#[derive(Debug, Clone, Copy)]
pub struct PowerSphere {
    pub power: f64,
}

impl WeightSpace for PowerSphere {
    fn project(&self, w: &[Complex64], v: &[Complex64]) -> Vec<Complex64> {
        let ww: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        let wv: f64 = w.iter().zip(v).map(|(a, b)| (a.conj() * b).re).sum();
        let k = wv / ww;
        w.iter().zip(v).map(|(a, b)| b - a * k).collect()
    }

    fn retract(&self, w_hat: &[Complex64]) -> Result<Vec<Complex64>> {
        let n: f64 = w_hat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::ZeroModulus(0));
        }
        let s = self.power.sqrt() / n;
        Ok(w_hat.iter().map(|z| z * s).collect())
    }

    fn constraint_error(&self, w: &[Complex64]) -> f64 {
        (w.iter().map(|z| z.norm_sqr()).sum::<f64>() - self.power).abs()
    }

    fn tangent_residual(&self, w: &[Complex64], xi: &[Complex64]) -> f64 {
        w.iter().zip(xi).map(|(a, b)| (a.conj() * b).re).sum::<f64>().abs()
    }
}

/// Half-wavelength uniform linear array starting at the origin.
pub fn fpa_ula_positions(num_antennas: usize, wavelength: f64) -> Vec<f64> {
    (0..num_antennas).map(|l| l as f64 * 0.5 * wavelength).collect()
}

/// Uniformly random feasible layout.
///
/// Draws `L` points on `[0, D - (L-1) lambda/2]`, sorts them and shifts the
/// `l`-th by `l lambda/2`, which maps the sorted draws one-to-one onto the
/// feasible set.
pub fn random_ma_positions(num_antennas: usize, aperture: f64, wavelength: f64, seed: u64) -> Result<Vec<f64>> {
    let half = 0.5 * wavelength;
    let slack = aperture - half * num_antennas.saturating_sub(1) as f64;
    if slack < -1e-12 * aperture.abs() {
        return Err(Error::InfeasibleGeometry {
            aperture,
            antennas: num_antennas,
            half_wavelength: half,
        });
    }
    let slack = slack.max(0.0);
    let mut r = rng::stream(seed, 0);
    let mut draws: Vec<f64> = (0..num_antennas).map(|_| r.random::<f64>() * slack).collect();
    draws.sort_by(f64::total_cmp);
    Ok(draws
        .into_iter()
        .enumerate()
        .map(|(l, u)| (u + l as f64 * half).min(aperture))
        .collect())
}

/// Elementwise `w_l / |w_l|`.
pub fn project_to_cm(w: &[Complex64]) -> Result<Vec<Complex64>> {
    crate::manifold::ConstantModulus.retract(w)
}

/// Solver settings shared by every scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOptions {
    pub schedule: PcpmSchedule,
    pub line_search: LineSearchParams,
    /// Inner iterations spent scoring each candidate during greedy
    /// selection.
    pub selection_iters: usize,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            schedule: PcpmSchedule::default(),
            line_search: LineSearchParams::default(),
            selection_iters: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdbOutput {
    pub weights: Vec<Complex64>,
    pub positions: Vec<f64>,
    pub msr: f64,
    pub trace: ConvergenceTrace,
}

/// Fully digital weights on `||w||^2 = L`, started from the best of the
/// matched filter at `positions` and the schedule's other start candidates.
/// With [`PositionMode::Frozen`] the positions come back unchanged.
pub fn fdb_gradient_solve(
    config: &ScenarioConfig,
    channels: &ChannelRealization,
    positions: &[f64],
    mode: PositionMode,
    opts: &SchemeOptions,
    seed: u64,
) -> Result<FdbOutput> {
    let start = BeamformerPoint {
        weights: matched_filter(positions, channels),
        positions: positions.to_vec(),
    };
    let mut problem = Problem {
        surrogate: Surrogate::new(
            channels,
            SmoothingParams::new(config.lse_alpha, opts.schedule.gamma, opts.schedule.rho)?,
            config.geometry(),
        ),
        space: PowerSphere {
            power: config.num_antennas as f64,
        },
        mode,
    };
    let start = problem.select_start(&start, &opts.schedule, &opts.line_search, seed)?;
    let (point, trace) = problem.pcpm(&start, &opts.schedule, &opts.line_search)?;
    Ok(FdbOutput {
        msr: multicast_secrecy_rate(&point.weights, &point.positions, channels),
        weights: point.weights,
        positions: point.positions,
        trace,
    })
}

/// `min_b R_b - max_e R_e` without the clamp at zero.
pub fn secrecy_margin(weights: &[Complex64], positions: &[f64], channels: &ChannelRealization) -> f64 {
    let (lu, eve) = user_rates(weights, positions, channels);
    lu.iter().copied().fold(f64::INFINITY, f64::min) - eve.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Relative margin a candidate's score must beat the incumbent by; smaller
/// gaps count as ties and keep the lower grid index.
pub const SELECTION_TIE_TOL: f64 = 1e-9;

/// Half-wavelength candidate grid over `[0, D]`.
pub fn selection_grid(aperture: f64, wavelength: f64) -> Vec<f64> {
    let half = 0.5 * wavelength;
    let n = (aperture / half * (1.0 + 1e-12)).floor() as usize + 1;
    (0..n).map(|k| k as f64 * half).collect()
}

/// Greedy selection of `num_antennas` grid points.
///
/// Each round scores every remaining candidate by the secrecy margin reached
/// by short fully digital weight optimization on the enlarged set and keeps
/// the best; ties (within [`SELECTION_TIE_TOL`]) go to the lowest grid
/// index. The margin is the
/// secrecy rate before clamping at zero, so rounds where every candidate
/// has zero secrecy rate still discriminate. Returned positions are sorted.
pub fn greedy_antenna_selection(
    config: &ScenarioConfig,
    channels: &ChannelRealization,
    grid: &[f64],
    num_antennas: usize,
    opts: &SchemeOptions,
) -> Result<Vec<f64>> {
    if grid.len() < num_antennas {
        return Err(Error::Config(alloc::format!(
            "selection grid has {} points, fewer than the {num_antennas} antennas",
            grid.len()
        )));
    }
    if grid.len() == num_antennas {
        return Ok(grid.to_vec());
    }
    let power = num_antennas as f64;
    let params = SmoothingParams::new(config.lse_alpha, opts.schedule.gamma, opts.schedule.rho)?;
    let mut chosen: Vec<usize> = Vec::with_capacity(num_antennas);
    while chosen.len() < num_antennas {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..grid.len() {
            if chosen.contains(&k) {
                continue;
            }
            let mut idx = chosen.clone();
            idx.push(k);
            idx.sort_unstable();
            let positions: Vec<f64> = idx.iter().map(|&i| grid[i]).collect();
            let score = score_subset(channels, &positions, power, params, config, opts)?;
            if best.is_none_or(|(_, s)| score > s + SELECTION_TIE_TOL * s.abs().max(1.0)) {
                best = Some((k, score));
            }
        }
        let (k, _) = best.ok_or(Error::EmptyInput)?;
        chosen.push(k);
    }
    chosen.sort_unstable();
    Ok(chosen.into_iter().map(|i| grid[i]).collect())
}

fn score_subset(
    channels: &ChannelRealization,
    positions: &[f64],
    power: f64,
    params: SmoothingParams,
    config: &ScenarioConfig,
    opts: &SchemeOptions,
) -> Result<f64> {
    let space = PowerSphere { power };
    let start = space.retract(&matched_filter(positions, channels))?;
    let problem = Problem {
        surrogate: Surrogate::new(channels, params, config.geometry()),
        space,
        mode: PositionMode::Frozen,
    };
    let start = BeamformerPoint {
        weights: start,
        positions: positions.to_vec(),
    };
    let w = match problem.cgd(&start, &opts.line_search, opts.schedule.epsilon_min, opts.selection_iters) {
        Ok((p, _)) => p.weights,
        // A degenerate surrogate cannot be optimized; score the start.
        Err(Error::Degenerate(_)) => start.weights,
        Err(e) => return Err(e),
    };
    Ok(secrecy_margin(&w, positions, channels))
}

/// Final output of any scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeResult {
    pub scheme: SchemeId,
    pub msr: f64,
    pub weights: Vec<Complex64>,
    pub positions: Vec<f64>,
    pub violation: f64,
    pub trace: ConvergenceTrace,
    /// The surrogate was degenerate at the starting point, so the start was
    /// reported without optimization.
    pub degenerate_start: bool,
}

fn finish(
    scheme: SchemeId,
    channels: &ChannelRealization,
    config: &ScenarioConfig,
    weights: Vec<Complex64>,
    positions: Vec<f64>,
    trace: ConvergenceTrace,
) -> SchemeResult {
    SchemeResult {
        scheme,
        msr: multicast_secrecy_rate(&weights, &positions, channels),
        violation: constraint_violation(&positions, &config.geometry()),
        weights,
        positions,
        trace,
        degenerate_start: false,
    }
}

/// Runs constant-modulus weight optimization with the positions frozen.
fn ab_frozen(
    scheme: SchemeId,
    config: &ScenarioConfig,
    channels: &ChannelRealization,
    positions: Vec<f64>,
    opts: &SchemeOptions,
    seed: u64,
) -> Result<SchemeResult> {
    let start = BeamformerPoint {
        weights: matched_filter(&positions, channels),
        positions,
    };
    let (schedule, ls) = (&opts.schedule, &opts.line_search);
    let out = select_start(&start, channels, config, schedule, ls, PositionMode::Frozen, seed)
        .and_then(|s| pcpm_from(&s, channels, config, schedule, ls, PositionMode::Frozen));
    match out {
        Ok(out) => Ok(finish(scheme, channels, config, out.point.weights, out.point.positions, out.trace)),
        Err(Error::Degenerate(_)) => Ok(degenerate(scheme, channels, config, start)),
        Err(e) => Err(e),
    }
}

fn degenerate(scheme: SchemeId, channels: &ChannelRealization, config: &ScenarioConfig, start: BeamformerPoint) -> SchemeResult {
    let mut r = finish(scheme, channels, config, start.weights, start.positions, ConvergenceTrace::default());
    r.degenerate_start = true;
    r
}

/// Dispatches `scheme`. Every reported rate comes from
/// [`multicast_secrecy_rate`] on `channels`.
pub fn run_scheme(
    scheme: SchemeId,
    config: &ScenarioConfig,
    channels: &ChannelRealization,
    seed: u64,
    opts: &SchemeOptions,
) -> Result<SchemeResult> {
    config.validate()?;
    channels.validate()?;
    let l = config.num_antennas;
    let lambda = config.wavelength;
    let fdb = |positions: &[f64], mode: PositionMode| -> Result<SchemeResult> {
        match fdb_gradient_solve(config, channels, positions, mode, opts, seed) {
            Ok(o) => Ok(finish(scheme, channels, config, o.weights, o.positions, o.trace)),
            Err(Error::Degenerate(_)) => {
                let start = BeamformerPoint {
                    weights: matched_filter(positions, channels),
                    positions: positions.to_vec(),
                };
                Ok(degenerate(scheme, channels, config, start))
            }
            Err(e) => Err(e),
        }
    };
    match scheme {
        SchemeId::ProposedMaAb => {
            let start = optimizer::initialize(config, channels, opts.schedule.init, seed)?;
            let (schedule, ls) = (&opts.schedule, &opts.line_search);
            let out = select_start(&start, channels, config, schedule, ls, PositionMode::Movable, seed)
                .and_then(|s| pcpm_from(&s, channels, config, schedule, ls, PositionMode::Movable));
            match out {
                Ok(out) => Ok(finish(scheme, channels, config, out.point.weights, out.point.positions, out.trace)),
                Err(Error::Degenerate(_)) => Ok(degenerate(scheme, channels, config, start)),
                Err(e) => Err(e),
            }
        }
        SchemeId::MaFdbGd => fdb(&optimizer::uniform_grid_positions(config)?, PositionMode::Movable),
        SchemeId::FpaFdbUla => fdb(&fpa_ula_positions(l, lambda), PositionMode::Frozen),
        SchemeId::FpaFdbSs => {
            let grid = selection_grid(config.aperture, lambda);
            let positions = greedy_antenna_selection(config, channels, &grid, l, opts)?;
            fdb(&positions, PositionMode::Frozen)
        }
        SchemeId::MaAbGd => {
            let mut r = fdb(&optimizer::uniform_grid_positions(config)?, PositionMode::Movable)?;
            let weights = project_to_cm(&r.weights)?;
            r.msr = multicast_secrecy_rate(&weights, &r.positions, channels);
            r.weights = weights;
            Ok(r)
        }
        SchemeId::FpaAbUla => ab_frozen(scheme, config, channels, fpa_ula_positions(l, lambda), opts, seed),
        SchemeId::MaAbR => {
            let positions = random_ma_positions(l, config.aperture, lambda, seed)?;
            ab_frozen(scheme, config, channels, positions, opts, seed)
        }
    }
}

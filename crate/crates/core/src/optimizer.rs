//! Penalty-constrained product-manifold optimization.
//!
//! The inner loop is a Riemannian conjugate-gradient descent with an Armijo
//! backtracking search; the outer loop tightens the softplus smoothing,
//! shrinks the gradient tolerance and raises the penalty weight while the
//! positions remain infeasible.

#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{field_response, ChannelRealization};
use crate::error::{Error, Result};
use crate::manifold::{ConstantModulus, TangentVector, WeightSpace};
use crate::objective::{constraint_violation, multicast_secrecy_rate, BeamformerPoint, Geometry, SmoothingParams, Surrogate};
use crate::rng;
use crate::scenario::ScenarioConfig;

/// How the next initial step is chosen from the accepted backtrack count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepSeedRule {
    /// `r = 1`: grow by `grow_after_one`; `r = 2`: keep; `r > 2`: grow by
    /// `grow_after_many`.
    #[default]
    AsPrinted,
    /// Same, but `r > 2` keeps the accepted step instead of growing it.
    ShrinkOnBacktrack,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchParams {
    /// Backtracking factor `tau` in (0, 1).
    pub tau: f64,
    /// Initial step seed of every inner solve.
    pub initial_step: f64,
    /// Armijo sufficient-decrease fraction in (0, 1].
    pub sufficient_decrease: f64,
    pub grow_after_one: f64,
    pub grow_after_many: f64,
    pub max_backtracks: usize,
    pub seed_rule: StepSeedRule,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self {
            tau: 0.5,
            initial_step: 1e-2,
            sufficient_decrease: 1e-4,
            grow_after_one: 2.0,
            grow_after_many: 2.0,
            max_backtracks: 30,
            seed_rule: StepSeedRule::AsPrinted,
        }
    }
}

impl LineSearchParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tau > 0.0
            && self.tau < 1.0
            && self.initial_step > 0.0
            && self.initial_step.is_finite()
            && self.sufficient_decrease > 0.0
            && self.sufficient_decrease <= 1.0
            && self.grow_after_one > 1.0
            && self.grow_after_many > 1.0
            && self.max_backtracks >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid line-search parameters".into()))
        }
    }

    /// Step seed for the next iteration after acceptance at backtrack `r`
    /// with step `step`.
    pub fn next_initial_step(&self, r: usize, step: f64) -> f64 {
        match r {
            1 => self.grow_after_one * step,
            2 => step,
            _ => match self.seed_rule {
                StepSeedRule::AsPrinted => self.grow_after_many * step,
                StepSeedRule::ShrinkOnBacktrack => step,
            },
        }
    }
}

/// Starting point of the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitStrategy {
    /// Evenly spread positions over `[0, D]`, all-ones weights.
    UniformGrid,
    /// Evenly spread positions, uniformly random phases.
    RandomPhase,
    /// Evenly spread positions, phases of `sum_b h_b(p0)`.
    #[default]
    MatchedFilter,
}

/// Outer-loop schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcpmSchedule {
    pub gamma: f64,
    pub gamma_min: f64,
    pub gamma_decay: f64,
    pub rho: f64,
    /// `rho` is divided by this factor whenever the violation is too large.
    pub rho_decay: f64,
    pub epsilon: f64,
    pub epsilon_min: f64,
    pub epsilon_decay: f64,
    pub violation_tol: f64,
    pub violation_tol_min: f64,
    pub violation_tol_decay: f64,
    /// Minimum iterate displacement `o_min`.
    pub step_floor: f64,
    pub max_outer_iters: usize,
    pub max_inner_iters: usize,
    pub init: InitStrategy,
    /// Random-phase candidates added to the start selection; `0` together
    /// with `probe_iters = 0` starts directly from `init`.
    pub random_starts: usize,
    /// Inner iterations spent on each start candidate.
    pub probe_iters: usize,
}

impl Default for PcpmSchedule {
    fn default() -> Self {
        Self {
            gamma: 0.1,
            gamma_min: 1e-4,
            gamma_decay: 0.5,
            rho: 100.0,
            rho_decay: 0.5,
            epsilon: 1e-2,
            epsilon_min: 1e-6,
            epsilon_decay: 0.5,
            violation_tol: 1e-2,
            violation_tol_min: 1e-8,
            violation_tol_decay: 0.5,
            step_floor: 1e-6,
            max_outer_iters: 50,
            max_inner_iters: 200,
            init: InitStrategy::MatchedFilter,
            random_starts: 8,
            probe_iters: 200,
        }
    }
}

impl PcpmSchedule {
    pub fn validate(&self) -> Result<()> {
        let decay = |x: f64| x > 0.0 && x < 1.0;
        let ok = self.gamma > 0.0
            && self.rho > 0.0
            && self.epsilon > 0.0
            && self.violation_tol >= 0.0
            && self.gamma_min >= 0.0
            && self.epsilon_min >= 0.0
            && self.violation_tol_min >= 0.0
            && self.step_floor >= 0.0
            && decay(self.gamma_decay)
            && decay(self.rho_decay)
            && decay(self.epsilon_decay)
            && decay(self.violation_tol_decay)
            && self.max_outer_iters >= 1
            && self.max_inner_iters >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("invalid PCPM schedule".into()))
        }
    }
}

/// Whether the solver may move the antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositionMode {
    #[default]
    Movable,
    Frozen,
}

/// One accepted inner iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerRecord {
    /// Objective after the step.
    pub objective: f64,
    /// Riemannian gradient norm at the point the step started from.
    pub grad_norm: f64,
    pub step: f64,
    pub backtracks: usize,
    /// Directional derivative of the accepted direction.
    pub directional: f64,
    /// Distance of the new weights from their constraint set; for
    /// constant-modulus runs `max_l | |w_l| - 1 |`.
    pub modulus_error: f64,
    /// Largest tangent-space residual of the gradient and the direction.
    pub tangent_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnerStatus {
    /// Gradient norm fell to the tolerance.
    Converged,
    /// Iteration cap reached with a gradient above tolerance.
    IterationLimit,
    /// No step satisfied the Armijo test; the last accepted point is kept.
    LineSearchFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerTrace {
    pub start_objective: f64,
    pub final_grad_norm: f64,
    pub records: Vec<InnerRecord>,
    pub status: InnerStatus,
}

impl InnerTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(self.start_objective, |r| r.objective)
    }

    /// Objective values including the starting value.
    pub fn objectives(&self) -> impl Iterator<Item = f64> + '_ {
        core::iter::once(self.start_objective).chain(self.records.iter().map(|r| r.objective))
    }
}

/// One outer iteration: the parameters it ran with and where it ended.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterRecord {
    pub gamma: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub violation_tol: f64,
    /// Constraint violation at the end of the iteration.
    pub violation: f64,
    pub msr: f64,
    /// Surrogate at the end point under this iteration's parameters.
    pub objective: f64,
    /// Surrogate at the end point under the next iteration's parameters.
    pub objective_next_params: f64,
    pub displacement: f64,
    pub inner: InnerTrace,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    pub outer: Vec<OuterRecord>,
}

impl ConvergenceTrace {
    pub fn inner_iterations(&self) -> usize {
        self.outer.iter().map(|o| o.inner.iterations()).sum()
    }

    pub fn outer_iterations(&self) -> usize {
        self.outer.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcpmOutput {
    pub point: BeamformerPoint,
    pub trace: ConvergenceTrace,
    pub msr: f64,
    pub violation: f64,
}

/// Hybrid conjugate parameter: the Hestenes-Stiefel quotient with both
/// previous vectors transported to `w_k`, clamped at zero.
///
/// Returns zero when the denominator vanishes or the gradient difference is
/// at rounding level (steepest-descent restart).
pub fn conjugate_parameter(grad: &TangentVector, grad_prev: &TangentVector, d_prev: &TangentVector, w_k: &[Complex64]) -> f64 {
    conjugate_parameter_in(&ConstantModulus, grad, grad_prev, d_prev, w_k)
}

fn transport_in<S: WeightSpace>(space: &S, w: &[Complex64], d: &TangentVector) -> TangentVector {
    TangentVector {
        w: space.project(w, &d.w),
        p: d.p.clone(),
    }
}

fn conjugate_parameter_in<S: WeightSpace>(
    space: &S,
    grad: &TangentVector,
    grad_prev: &TangentVector,
    d_prev: &TangentVector,
    w_k: &[Complex64],
) -> f64 {
    let g_prev = transport_in(space, w_k, grad_prev);
    let d_t = transport_in(space, w_k, d_prev);
    let y = grad.add_scaled(-1.0, &g_prev);
    // A gradient change at rounding level carries no curvature information.
    if y.norm() <= 4.0 * f64::EPSILON * grad.norm() {
        return 0.0;
    }
    let num = grad.dot(&y);
    let den = y.dot(&d_t);
    if !(den.abs() >= 1e-30) || !num.is_finite() {
        return 0.0;
    }
    (num / den).max(0.0)
}

/// `-grad + sigma * d_prev_transported`.
pub fn conjugate_direction(grad: &TangentVector, sigma: f64, d_prev_transported: &TangentVector) -> TangentVector {
    grad.scaled(-1.0).add_scaled(sigma, d_prev_transported)
}

/// Result of an accepted line search.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub point: BeamformerPoint,
    pub value: f64,
    pub step: f64,
    pub backtracks: usize,
}

/// Armijo backtracking along `direction`.
///
/// Tries `step = tau^r * initial_step` for `r = 1, 2, ...` and accepts the
/// first retracted point with
/// `phi <= phi_current + c * step * directional`. Candidates where the
/// objective cannot be evaluated count as rejections.
#[allow(clippy::too_many_arguments)]
pub fn armijo_search<S, F>(
    space: &S,
    point: &BeamformerPoint,
    direction: &TangentVector,
    phi_current: f64,
    directional: f64,
    params: &LineSearchParams,
    initial_step: f64,
    mut objective: F,
) -> Result<StepOutcome>
where
    S: WeightSpace,
    F: FnMut(&BeamformerPoint) -> Result<f64>,
{
    if !(directional < 0.0) {
        return Err(Error::NotDescent(directional));
    }
    let mut step = initial_step;
    for r in 1..=params.max_backtracks {
        step *= params.tau;
        let w_hat: Vec<Complex64> = point
            .weights
            .iter()
            .zip(&direction.w)
            .map(|(w, d)| w + d * step)
            .collect();
        let Ok(weights) = space.retract(&w_hat) else {
            continue;
        };
        let positions: Vec<f64> = point
            .positions
            .iter()
            .zip(&direction.p)
            .map(|(p, d)| p + d * step)
            .collect();
        let candidate = BeamformerPoint { weights, positions };
        match objective(&candidate) {
            Ok(v) if v <= phi_current + params.sufficient_decrease * step * directional => {
                return Ok(StepOutcome {
                    point: candidate,
                    value: v,
                    step,
                    backtracks: r,
                });
            }
            _ => {}
        }
    }
    Err(Error::LineSearchFailed(params.max_backtracks))
}

/// The surrogate together with the weight constraint set and the
/// position handling, i.e. everything the inner loop needs.
pub struct Problem<'a, S: WeightSpace> {
    pub surrogate: Surrogate<'a>,
    pub space: S,
    pub mode: PositionMode,
}

impl<'a, S: WeightSpace> Problem<'a, S> {
    fn gradient(&self, point: &BeamformerPoint) -> Result<(f64, TangentVector)> {
        let e = self.surrogate.evaluate(&point.weights, &point.positions)?;
        let p = match self.mode {
            PositionMode::Movable => e.positions,
            PositionMode::Frozen => alloc::vec![0.0; e.positions.len()],
        };
        Ok((
            e.value,
            TangentVector {
                w: self.space.project(&point.weights, &e.weights),
                p,
            },
        ))
    }

    /// One inner solve from `start` with gradient tolerance `epsilon`.
    pub fn cgd(
        &self,
        start: &BeamformerPoint,
        ls: &LineSearchParams,
        epsilon: f64,
        max_inner: usize,
    ) -> Result<(BeamformerPoint, InnerTrace)> {
        let mut point = start.clone();
        let (mut value, mut grad) = self.gradient(&point)?;
        let mut trace = InnerTrace {
            start_objective: value,
            final_grad_norm: grad.norm(),
            records: Vec::new(),
            status: InnerStatus::IterationLimit,
        };
        let mut prev: Option<(TangentVector, TangentVector)> = None;
        let mut seed = ls.initial_step;
        loop {
            let grad_norm = grad.norm();
            trace.final_grad_norm = grad_norm;
            if grad_norm <= epsilon {
                trace.status = InnerStatus::Converged;
                break;
            }
            if trace.records.len() >= max_inner {
                trace.status = InnerStatus::IterationLimit;
                break;
            }
            let mut direction = match &prev {
                None => grad.scaled(-1.0),
                Some((g_prev, d_prev)) => {
                    let sigma = conjugate_parameter_in(&self.space, &grad, g_prev, d_prev, &point.weights);
                    conjugate_direction(&grad, sigma, &transport_in(&self.space, &point.weights, d_prev))
                }
            };
            let mut directional = grad.dot(&direction);
            if !(directional < 0.0) {
                direction = grad.scaled(-1.0);
                directional = -grad_norm * grad_norm;
            }
            let outcome = armijo_search(
                &self.space,
                &point,
                &direction,
                value,
                directional,
                ls,
                seed,
                |c| self.surrogate.value(&c.weights, &c.positions),
            );
            let outcome = match outcome {
                Ok(o) => o,
                Err(Error::LineSearchFailed(_)) | Err(Error::NotDescent(_)) => {
                    trace.status = InnerStatus::LineSearchFailed;
                    break;
                }
                Err(e) => return Err(e),
            };
            seed = ls.next_initial_step(outcome.backtracks, outcome.step);
            let residual = self
                .space
                .tangent_residual(&point.weights, &grad.w)
                .max(self.space.tangent_residual(&point.weights, &direction.w));
            point = outcome.point;
            let (new_value, new_grad) = self.gradient(&point)?;
            trace.records.push(InnerRecord {
                objective: outcome.value,
                grad_norm,
                step: outcome.step,
                backtracks: outcome.backtracks,
                directional,
                modulus_error: self.space.constraint_error(&point.weights),
                tangent_residual: residual,
            });
            value = new_value;
            prev = Some((grad, direction));
            grad = new_grad;
        }
        Ok((point, trace))
    }

    /// Outer penalty/smoothing loop starting at `start`.
    pub fn pcpm(
        &mut self,
        start: &BeamformerPoint,
        schedule: &PcpmSchedule,
        ls: &LineSearchParams,
    ) -> Result<(BeamformerPoint, ConvergenceTrace)> {
        schedule.validate()?;
        ls.validate()?;
        let geometry = self.surrogate.geometry;
        let channels = self.surrogate.channels;
        let alpha = self.surrogate.params.lse_alpha;
        let (mut gamma, mut rho, mut eps, mut tol) =
            (schedule.gamma, schedule.rho, schedule.epsilon, schedule.violation_tol);
        let mut point = start.clone();
        let mut trace = ConvergenceTrace::default();
        for _ in 0..schedule.max_outer_iters {
            self.surrogate.params = SmoothingParams::new(alpha, gamma, rho)?;
            let (next, inner) = self.cgd(&point, ls, eps, schedule.max_inner_iters)?;
            let displacement = self.displacement(&point, &next);

            let next_gamma = (gamma * schedule.gamma_decay).max(schedule.gamma_min);
            let next_eps = (eps * schedule.epsilon_decay).max(schedule.epsilon_min);
            let next_tol = (tol * schedule.violation_tol_decay).max(schedule.violation_tol_min);
            let violation = constraint_violation(&next.positions, &geometry);
            let next_rho = if violation >= next_tol { rho / schedule.rho_decay } else { rho };

            let objective = inner.final_objective();
            let next_params = Surrogate::new(channels, SmoothingParams::new(alpha, next_gamma, next_rho)?, geometry);
            let objective_next_params = next_params.value(&next.weights, &next.positions)?;
            trace.outer.push(OuterRecord {
                gamma,
                rho,
                epsilon: eps,
                violation_tol: tol,
                violation,
                msr: multicast_secrecy_rate(&next.weights, &next.positions, channels),
                objective,
                objective_next_params,
                displacement,
                inner,
            });
            point = next;
            (gamma, rho, eps, tol) = (next_gamma, next_rho, next_eps, next_tol);
            if displacement <= schedule.step_floor
                && gamma <= schedule.gamma_min
                && eps <= schedule.epsilon_min
                && tol <= schedule.violation_tol_min
            {
                break;
            }
        }
        Ok((point, trace))
    }

    /// `|| [w_new; p_new] - [w_old; p_old] ||`.
    fn displacement(&self, a: &BeamformerPoint, b: &BeamformerPoint) -> f64 {
        let w: f64 = a.weights.iter().zip(&b.weights).map(|(x, y)| (x - y).norm_sqr()).sum();
        let p: f64 = a
            .positions
            .iter()
            .zip(&b.positions)
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        (w + p).sqrt()
    }
}

/// Inner conjugate-gradient solve with fixed smoothing parameters.
pub fn cgd_solve(
    start: &BeamformerPoint,
    channels: &ChannelRealization,
    params: &SmoothingParams,
    geometry: &Geometry,
    ls: &LineSearchParams,
    epsilon: f64,
    max_inner: usize,
    mode: PositionMode,
) -> Result<(BeamformerPoint, InnerTrace)> {
    params.validate()?;
    ls.validate()?;
    let problem = Problem {
        surrogate: Surrogate::new(channels, *params, *geometry),
        space: ConstantModulus,
        mode,
    };
    problem.cgd(start, ls, epsilon, max_inner)
}

/// Evenly spread positions `l D / (L - 1)` over the aperture.
pub fn uniform_grid_positions(config: &ScenarioConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let n = config.num_antennas;
    if n == 1 {
        return Ok(alloc::vec![0.0]);
    }
    let spacing = config.aperture / (n - 1) as f64;
    Ok((0..n).map(|l| l as f64 * spacing).collect())
}

/// Phases of `v` as a unit-modulus vector; zero entries map to `1`.
pub fn phases_of(v: &[Complex64]) -> Vec<Complex64> {
    v.iter()
        .map(|z| {
            let r = z.norm();
            if r > 0.0 {
                z / r
            } else {
                Complex64::new(1.0, 0.0)
            }
        })
        .collect()
}

/// Starting point for `strategy`. Positions are always the uniform grid.
pub fn initialize(
    config: &ScenarioConfig,
    channels: &ChannelRealization,
    strategy: InitStrategy,
    seed: u64,
) -> Result<BeamformerPoint> {
    let positions = uniform_grid_positions(config)?;
    let weights = match strategy {
        InitStrategy::UniformGrid => alloc::vec![Complex64::new(1.0, 0.0); positions.len()],
        InitStrategy::RandomPhase => {
            let mut r = rng::stream(seed, 0);
            (0..positions.len())
                .map(|_| Complex64::cis(r.random_range(0.0..core::f64::consts::TAU)))
                .collect()
        }
        InitStrategy::MatchedFilter => matched_filter(&positions, channels),
    };
    Ok(BeamformerPoint { weights, positions })
}

/// Phases of `sum_b h_b(p)`.
pub fn matched_filter(positions: &[f64], channels: &ChannelRealization) -> Vec<Complex64> {
    let mut sum = alloc::vec![Complex64::new(0.0, 0.0); positions.len()];
    for u in &channels.lus {
        for (s, h) in sum.iter_mut().zip(field_response(positions, u, channels.wavelength)) {
            *s += h;
        }
    }
    phases_of(&sum)
}

/// Start candidates at `positions`: `first`, the phases of every single
/// LU channel, then `random` uniformly random phase vectors.
pub fn start_candidates(
    first: &[Complex64],
    positions: &[f64],
    channels: &ChannelRealization,
    random: usize,
    seed: u64,
) -> Vec<Vec<Complex64>> {
    let mut out = alloc::vec![first.to_vec()];
    for u in &channels.lus {
        out.push(phases_of(&field_response(positions, u, channels.wavelength)));
    }
    let mut r = rng::stream(seed, 1);
    for _ in 0..random {
        out.push(
            (0..positions.len())
                .map(|_| Complex64::cis(r.random_range(0.0..core::f64::consts::TAU)))
                .collect(),
        );
    }
    out
}

impl<S: WeightSpace> Problem<'_, S> {
    /// Runs a short inner solve from every candidate under the schedule's
    /// initial smoothing parameters and returns the point with the lowest
    /// objective (the earliest on ties). Candidates where the surrogate is
    /// degenerate are skipped. With `probe_iters = 0` and no random starts
    /// this returns `start` unchanged.
    pub fn select_start(
        &mut self,
        start: &BeamformerPoint,
        schedule: &PcpmSchedule,
        ls: &LineSearchParams,
        seed: u64,
    ) -> Result<BeamformerPoint> {
        if schedule.probe_iters == 0 && schedule.random_starts == 0 {
            return Ok(start.clone());
        }
        let alpha = self.surrogate.params.lse_alpha;
        self.surrogate.params = SmoothingParams::new(alpha, schedule.gamma, schedule.rho)?;
        let mut best: Option<(BeamformerPoint, f64)> = None;
        let mut last_err = None;
        for w in start_candidates(&start.weights, &start.positions, self.surrogate.channels, schedule.random_starts, seed) {
            let candidate = BeamformerPoint {
                weights: self.space.retract(&w)?,
                positions: start.positions.clone(),
            };
            match self.cgd(&candidate, ls, schedule.epsilon, schedule.probe_iters) {
                Ok((p, trace)) => {
                    let v = trace.final_objective();
                    if best.as_ref().is_none_or(|(_, b)| v < *b) {
                        best = Some((p, v));
                    }
                }
                Err(e @ Error::Degenerate(_)) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        match best {
            Some((p, _)) => Ok(p),
            None => Err(last_err.unwrap_or(Error::Degenerate(0.0))),
        }
    }
}

/// Runs the outer loop on constant-modulus weights from `start`.
pub fn pcpm_from(
    start: &BeamformerPoint,
    channels: &ChannelRealization,
    config: &ScenarioConfig,
    schedule: &PcpmSchedule,
    ls: &LineSearchParams,
    mode: PositionMode,
) -> Result<PcpmOutput> {
    let geometry = config.geometry();
    let mut problem = Problem {
        surrogate: Surrogate::new(
            channels,
            SmoothingParams::new(config.lse_alpha, schedule.gamma, schedule.rho)?,
            geometry,
        ),
        space: ConstantModulus,
        mode,
    };
    let (point, trace) = problem.pcpm(start, schedule, ls)?;
    Ok(PcpmOutput {
        msr: multicast_secrecy_rate(&point.weights, &point.positions, channels),
        violation: constraint_violation(&point.positions, &geometry),
        point,
        trace,
    })
}

/// The proposed joint design: initialize, pick the best start candidate,
/// then run the outer loop with movable antennas.
pub fn pcpm_solve(
    config: &ScenarioConfig,
    channels: &ChannelRealization,
    schedule: &PcpmSchedule,
    ls: &LineSearchParams,
    seed: u64,
) -> Result<PcpmOutput> {
    config.validate()?;
    channels.validate()?;
    let start = initialize(config, channels, schedule.init, seed)?;
    let start = select_start(&start, channels, config, schedule, ls, PositionMode::Movable, seed)?;
    pcpm_from(&start, channels, config, schedule, ls, PositionMode::Movable)
}

/// [`Problem::select_start`] on constant-modulus weights.
pub fn select_start(
    start: &BeamformerPoint,
    channels: &ChannelRealization,
    config: &ScenarioConfig,
    schedule: &PcpmSchedule,
    ls: &LineSearchParams,
    mode: PositionMode,
    seed: u64,
) -> Result<BeamformerPoint> {
    let mut problem = Problem {
        surrogate: Surrogate::new(
            channels,
            SmoothingParams::new(config.lse_alpha, schedule.gamma, schedule.rho)?,
            config.geometry(),
        ),
        space: ConstantModulus,
        mode,
    };
    problem.select_start(start, schedule, ls, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{sample_channels, UserChannel};
    use crate::manifold::project_to_tangent;
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn random_cm(seed: u64, n: usize) -> Vec<Complex64> {
        let mut r = rng::stream(seed, 9);
        (0..n).map(|_| Complex64::cis(r.random_range(0.0..6.3))).collect()
    }

    fn random_tangent(seed: u64, w: &[Complex64]) -> TangentVector {
        let mut r = rng::stream(seed, 10);
        let v: Vec<Complex64> = w.iter().map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect();
        TangentVector {
            w: project_to_tangent(w, &v),
            p: w.iter().map(|_| r.random_range(-1.0..1.0)).collect(),
        }
    }

    fn small_config() -> ScenarioConfig {
        let mut c = ScenarioConfig::paper_default();
        c.num_antennas = 4;
        c.num_lus = 2;
        c.num_eves = 2;
        c.num_paths = 3;
        c
    }

    #[test]
    fn step_seed_rule() {
        let ls = LineSearchParams::default();
        assert_eq!(ls.next_initial_step(1, 0.25), 0.5);
        assert_eq!(ls.next_initial_step(2, 0.25), 0.25);
        assert_eq!(ls.next_initial_step(5, 0.25), 0.5);
        let shrink = LineSearchParams {
            seed_rule: StepSeedRule::ShrinkOnBacktrack,
            ..ls
        };
        assert_eq!(shrink.next_initial_step(5, 0.25), 0.25);
        assert!(LineSearchParams { tau: 1.0, ..ls }.validate().is_err());
        assert!(LineSearchParams { max_backtracks: 0, ..ls }.validate().is_err());
    }

    #[test]
    fn armijo_on_euclidean_quadratic() {
        let point = BeamformerPoint {
            weights: vec![Complex64::new(1.0, 0.0); 2],
            positions: vec![0.3, -0.4],
        };
        let phi = |b: &BeamformerPoint| Ok(b.positions.iter().map(|x| x * x).sum::<f64>());
        let grad = TangentVector {
            w: vec![Complex64::new(0.0, 0.0); 2],
            p: vec![0.6, -0.8],
        };
        let d = grad.scaled(-1.0);
        let ls = LineSearchParams::default();
        let out = armijo_search(&ConstantModulus, &point, &d, 0.25, grad.dot(&d), &ls, ls.initial_step, phi).unwrap();
        assert_eq!(out.backtracks, 1);
        assert_eq!(out.step, 0.5 * ls.initial_step);
        assert!(0.25 - out.value >= -ls.sufficient_decrease * out.step * grad.dot(&d));
        assert_eq!(out.point.weights, point.weights);

        let err = armijo_search(&ConstantModulus, &point, &d, 0.25, 0.0, &ls, 1.0, phi).unwrap_err();
        assert!(matches!(err, Error::NotDescent(_)));
        // An ascent direction can never be accepted.
        let err = armijo_search(&ConstantModulus, &point, &grad, 0.25, -1.0, &ls, 1.0, phi).unwrap_err();
        assert_eq!(err, Error::LineSearchFailed(30));
    }

    #[test]
    fn conjugate_parameter_cases() {
        let w = random_cm(1, 6);
        let g = random_tangent(2, &w);
        let d = random_tangent(3, &w);
        assert_eq!(conjugate_parameter(&g, &g, &d, &w), 0.0);
        let zero = TangentVector::zeros(6);
        assert_eq!(conjugate_parameter(&g, &g, &zero, &w), 0.0);

        // Independent transcription with explicit transports.
        let w_old = random_cm(4, 6);
        let g_prev = random_tangent(5, &w_old);
        let d_prev = random_tangent(6, &w_old);
        let t = |v: &TangentVector| TangentVector {
            w: w.iter()
                .zip(&v.w)
                .map(|(a, b)| b - a * (b * a.conj()).re)
                .collect(),
            p: v.p.clone(),
        };
        let (gt, dt) = (t(&g_prev), t(&d_prev));
        let mut num = 0.0;
        let mut den = 0.0;
        for l in 0..6 {
            let y = g.w[l] - gt.w[l];
            num += (g.w[l].conj() * y).re + g.p[l] * (g.p[l] - gt.p[l]);
            den += (y.conj() * dt.w[l]).re + (g.p[l] - gt.p[l]) * dt.p[l];
        }
        let expected = (num / den).max(0.0);
        let got = conjugate_parameter(&g, &g_prev, &d_prev, &w);
        assert!(got >= 0.0);
        assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1e-300), "{got} vs {expected}");
    }

    #[test]
    fn conjugate_direction_cases() {
        let w = random_cm(7, 5);
        let g = random_tangent(8, &w);
        let d = random_tangent(9, &w);
        assert_eq!(conjugate_direction(&g, 0.0, &d), g.scaled(-1.0));
        assert_eq!(conjugate_direction(&TangentVector::zeros(5), 1.0, &d), d);
        let dir = conjugate_direction(&g, 0.3, &d);
        assert!(crate::manifold::tangent_residual(&w, &dir.w) <= 1e-10);
        if 0.3 * g.dot(&d) < g.dot(&g) {
            assert!(g.dot(&dir) < 0.0);
        }
    }

    #[test]
    fn initialization() {
        let mut c = small_config();
        c.aperture = 0.3;
        let ch = sample_channels(&c, 1).unwrap();
        let p = initialize(&c, &ch, InitStrategy::UniformGrid, 0).unwrap();
        for (a, b) in p.positions.iter().zip([0.0, 0.1, 0.2, 0.3]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let mf = initialize(&c, &ch, InitStrategy::MatchedFilter, 0).unwrap();
        assert!(mf.modulus_error() < 1e-15);
        let a = initialize(&c, &ch, InitStrategy::RandomPhase, 42).unwrap();
        let b = initialize(&c, &ch, InitStrategy::RandomPhase, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.modulus_error() < 1e-15);
        c.aperture = 0.001;
        assert!(initialize(&c, &ch, InitStrategy::UniformGrid, 0).is_err());
    }

    #[test]
    fn converged_start_takes_no_steps() {
        let c = small_config();
        let ch = sample_channels(&c, 2).unwrap();
        let start = initialize(&c, &ch, InitStrategy::MatchedFilter, 0).unwrap();
        let params = SmoothingParams::new(1.0, 0.1, 100.0).unwrap();
        let (p, trace) = cgd_solve(&start, &ch, &params, &c.geometry(), &LineSearchParams::default(), 1e9, 200, PositionMode::Movable).unwrap();
        assert_eq!(p, start);
        assert_eq!(trace.iterations(), 0);
        assert_eq!(trace.status, InnerStatus::Converged);
    }

    #[test]
    fn inner_loop_is_monotone() {
        let c = small_config();
        let ch = sample_channels(&c, 3).unwrap();
        let start = initialize(&c, &ch, InitStrategy::RandomPhase, 3).unwrap();
        let params = SmoothingParams::new(1.0, 0.1, 100.0).unwrap();
        let (_, trace) = cgd_solve(&start, &ch, &params, &c.geometry(), &LineSearchParams::default(), 1e-6, 200, PositionMode::Movable).unwrap();
        assert!(trace.iterations() > 0);
        let mut prev = trace.start_objective;
        for r in &trace.records {
            assert!(r.objective <= prev);
            assert!(prev - r.objective >= -1e-4 * r.step * r.directional);
            assert!(r.modulus_error <= 1e-12);
            prev = r.objective;
        }
        assert!(trace.final_objective() < trace.start_objective);
    }

    #[test]
    fn identical_users_leave_ratio_flat() {
        let u = UserChannel {
            angles: vec![0.5, 1.7],
            gains: vec![Complex64::new(0.3, 0.2), Complex64::new(-0.1, 0.4)],
            distance: 60.0,
            snr_scale: 100.0,
        };
        let ch = ChannelRealization {
            wavelength: 0.01,
            num_paths: 2,
            lus: vec![u.clone()],
            eves: vec![u],
        };
        let c = small_config();
        let start = BeamformerPoint {
            weights: random_cm(3, 4),
            positions: vec![0.05, 0.1, 0.15, 0.2],
        };
        let params = SmoothingParams::new(1.0, 0.1, 100.0).unwrap();
        let s = Surrogate::new(&ch, params, c.geometry());
        let (end, _) = cgd_solve(&start, &ch, &params, &c.geometry(), &LineSearchParams::default(), 1e-9, 50, PositionMode::Movable).unwrap();
        assert_abs_diff_eq!(s.ratio(&end.weights, &end.positions).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.ratio(&start.weights, &start.positions).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn schedule_respects_floors_and_monotonicity() {
        let c = small_config();
        let ch = sample_channels(&c, 4).unwrap();
        let sched = PcpmSchedule::default();
        let out = pcpm_solve(&c, &ch, &sched, &LineSearchParams::default(), 4).unwrap();
        let outer = &out.trace.outer;
        assert!(!outer.is_empty() && outer.len() <= sched.max_outer_iters);
        for pair in outer.windows(2) {
            assert!(pair[1].rho >= pair[0].rho);
            assert!(pair[1].gamma <= pair[0].gamma && pair[1].gamma >= sched.gamma_min);
            assert!(pair[1].epsilon <= pair[0].epsilon && pair[1].epsilon >= sched.epsilon_min);
            assert!(pair[1].violation_tol <= pair[0].violation_tol && pair[1].violation_tol >= sched.violation_tol_min);
        }
        assert!(out.violation <= 1e-6);
        assert!(out.point.modulus_error() <= 1e-12);
        let again = pcpm_solve(&c, &ch, &sched, &LineSearchParams::default(), 4).unwrap();
        assert_eq!(again, out);
    }
}

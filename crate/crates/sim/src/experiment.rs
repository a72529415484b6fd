use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use masec_core::baselines::{run_scheme, SchemeId, SchemeOptions};
use masec_core::channel::{channel_correlation, perturb_csi, sample_channels, CsiErrorParams};
use masec_core::objective::{constraint_violation, multicast_secrecy_rate};
use masec_core::rng::derive_seed;
use masec_core::scenario::{dbw_to_watts, ScenarioConfig};
use rayon::prelude::*;

/// The experiment suite. Each kind binds its sweep values to one scenario
/// field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    /// Objective and violation traces; sweeps `L`.
    Convergence,
    /// Sweeps the log-sum-exp constant `alpha`.
    AlphaSweep,
    /// Worst-case LU/EVE channel correlation; sweeps `L`.
    CorrelationVsL,
    MsrVsL,
    /// Sweeps `P_t` in dBW.
    MsrVsPower,
    MsrVsNb,
    MsrVsNe,
    /// Sweeps the aperture in wavelengths.
    MsrVsD,
    /// Final antenna positions; sweeps `L`.
    PositionsSnapshot,
    MsrVsMp,
    /// Sweeps the maximum AoD error `nu` (radians).
    CsiAodSweep,
    /// Sweeps the gain error variance `chi`.
    CsiGainSweep,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 12] = [
        ExperimentKind::Convergence,
        ExperimentKind::AlphaSweep,
        ExperimentKind::CorrelationVsL,
        ExperimentKind::MsrVsL,
        ExperimentKind::MsrVsPower,
        ExperimentKind::MsrVsNb,
        ExperimentKind::MsrVsNe,
        ExperimentKind::MsrVsD,
        ExperimentKind::PositionsSnapshot,
        ExperimentKind::MsrVsMp,
        ExperimentKind::CsiAodSweep,
        ExperimentKind::CsiGainSweep,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::AlphaSweep => "alpha_sweep",
            ExperimentKind::CorrelationVsL => "correlation_vs_L",
            ExperimentKind::MsrVsL => "msr_vs_L",
            ExperimentKind::MsrVsPower => "msr_vs_power",
            ExperimentKind::MsrVsNb => "msr_vs_Nb",
            ExperimentKind::MsrVsNe => "msr_vs_Ne",
            ExperimentKind::MsrVsD => "msr_vs_D",
            ExperimentKind::PositionsSnapshot => "positions_snapshot",
            ExperimentKind::MsrVsMp => "msr_vs_Mp",
            ExperimentKind::CsiAodSweep => "csi_aod_sweep",
            ExperimentKind::CsiGainSweep => "csi_gain_sweep",
        }
    }

    /// Name and unit of the swept quantity, for listings and chart axes.
    pub fn sweep_label(&self) -> &'static str {
        match self {
            ExperimentKind::Convergence | ExperimentKind::CorrelationVsL | ExperimentKind::MsrVsL => "L (antennas)",
            ExperimentKind::PositionsSnapshot => "L (antennas)",
            ExperimentKind::AlphaSweep => "alpha",
            ExperimentKind::MsrVsPower => "P_t (dBW)",
            ExperimentKind::MsrVsNb => "N_b (LUs)",
            ExperimentKind::MsrVsNe => "N_e (EVEs)",
            ExperimentKind::MsrVsD => "D (wavelengths)",
            ExperimentKind::MsrVsMp => "M_p (paths)",
            ExperimentKind::CsiAodSweep => "nu (rad)",
            ExperimentKind::CsiGainSweep => "chi",
        }
    }

    /// Sweep used when the configuration gives none.
    pub fn default_sweep(&self, base: &ScenarioConfig) -> Vec<f64> {
        match self {
            ExperimentKind::Convergence | ExperimentKind::PositionsSnapshot => vec![base.num_antennas as f64],
            ExperimentKind::AlphaSweep => vec![1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3],
            ExperimentKind::CorrelationVsL | ExperimentKind::MsrVsL => vec![4.0, 8.0, 12.0, 16.0, 20.0],
            ExperimentKind::MsrVsPower => vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            ExperimentKind::MsrVsNb | ExperimentKind::MsrVsNe => vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            ExperimentKind::MsrVsD => vec![10.0, 20.0, 30.0, 40.0, 50.0],
            ExperimentKind::MsrVsMp => vec![2.0, 4.0, 6.0, 8.0, 10.0],
            ExperimentKind::CsiAodSweep => vec![0.0, 0.05, 0.1, 0.15, 0.2],
            ExperimentKind::CsiGainSweep => vec![0.0, 0.01, 0.02, 0.05, 0.1],
        }
    }

    /// Schemes used when the configuration gives none.
    pub fn default_schemes(&self) -> Vec<SchemeId> {
        match self {
            ExperimentKind::Convergence | ExperimentKind::AlphaSweep => vec![SchemeId::ProposedMaAb],
            ExperimentKind::CorrelationVsL => vec![SchemeId::ProposedMaAb, SchemeId::FpaAbUla],
            ExperimentKind::PositionsSnapshot => vec![SchemeId::ProposedMaAb, SchemeId::MaFdbGd, SchemeId::MaAbR],
            _ => SchemeId::ALL.to_vec(),
        }
    }

    /// Whether sweep values must be whole numbers.
    pub fn integer_sweep(&self) -> bool {
        matches!(
            self,
            ExperimentKind::Convergence
                | ExperimentKind::CorrelationVsL
                | ExperimentKind::MsrVsL
                | ExperimentKind::PositionsSnapshot
                | ExperimentKind::MsrVsNb
                | ExperimentKind::MsrVsNe
                | ExperimentKind::MsrVsMp
        )
    }

    /// Scenario and CSI errors for one sweep point.
    pub fn bind(&self, base: &ScenarioConfig, csi: &CsiErrorParams, value: f64) -> (ScenarioConfig, CsiErrorParams) {
        let mut c = base.clone();
        let mut e = *csi;
        let count = value.round() as usize;
        match self {
            ExperimentKind::Convergence
            | ExperimentKind::CorrelationVsL
            | ExperimentKind::MsrVsL
            | ExperimentKind::PositionsSnapshot => c.num_antennas = count,
            ExperimentKind::AlphaSweep => c.lse_alpha = value,
            ExperimentKind::MsrVsPower => c.total_power = dbw_to_watts(value),
            ExperimentKind::MsrVsNb => c.num_lus = count,
            ExperimentKind::MsrVsNe => c.num_eves = count,
            ExperimentKind::MsrVsD => c.aperture = value * c.wavelength,
            ExperimentKind::MsrVsMp => c.num_paths = count,
            ExperimentKind::CsiAodSweep => e.max_aod_error = value,
            ExperimentKind::CsiGainSweep => e.gain_error_variance = value,
        }
        (c, e)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown experiment `{0}`")]
pub struct UnknownExperiment(pub String);

impl FromStr for ExperimentKind {
    type Err = UnknownExperiment;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        Self::ALL
            .iter()
            .copied()
            .find(|k| k.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownExperiment(s.to_string()))
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub schemes: Vec<SchemeId>,
    pub sweep_values: Vec<f64>,
    pub trials: usize,
    pub base_config: ScenarioConfig,
    /// CSI errors applied at every sweep point unless the experiment sweeps
    /// them.
    pub csi: CsiErrorParams,
    pub solver: SchemeOptions,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; `0` uses every available core.
    pub workers: usize,
    /// Record wall-clock time per trial. Off by default so that output is
    /// byte-reproducible.
    pub record_timing: bool,
}

impl ExperimentSpec {
    pub fn new(experiment: ExperimentKind, base_config: ScenarioConfig) -> Self {
        Self {
            experiment,
            schemes: experiment.default_schemes(),
            sweep_values: experiment.default_sweep(&base_config),
            trials: 100,
            base_config,
            csi: CsiErrorParams::default(),
            solver: SchemeOptions::default(),
            master_seed: 1,
            output_dir: PathBuf::from("results"),
            workers: 0,
            record_timing: false,
        }
    }

    /// Checks the spec and every bound sweep point.
    pub fn validate(&self) -> Result<(), masec_core::Error> {
        use masec_core::Error;
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep_values.is_empty() {
            return Err(Error::Config("sweep values must not be empty".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::Config("at least one scheme is required".into()));
        }
        self.solver.schedule.validate()?;
        self.solver.line_search.validate()?;
        for &v in &self.sweep_values {
            if !v.is_finite() {
                return Err(Error::Config(format!("sweep value {v} is not finite")));
            }
            if self.experiment.integer_sweep() && (v < 0.0 || v.fract() != 0.0) {
                return Err(Error::Config(format!(
                    "{} sweep values must be non-negative integers (got {v})",
                    self.experiment
                )));
            }
            let (config, csi) = self.experiment.bind(&self.base_config, &self.csi, v);
            config.validate()?;
            csi.validate()?;
        }
        Ok(())
    }

    /// Seed of trial `trial` of scheme `scheme` at sweep point `sweep`.
    pub fn child_seed(&self, sweep: usize, scheme: usize, trial: usize) -> u64 {
        derive_seed(self.master_seed, &[SCHEME_TAG, sweep as u64, scheme as u64, trial as u64])
    }

    /// Channel seed of trial `trial`, shared by every scheme and sweep point.
    pub fn channel_seed(&self, trial: usize) -> u64 {
        derive_seed(self.master_seed, &[CHANNEL_TAG, trial as u64])
    }

    /// Seed of the CSI error draw of trial `trial`, shared likewise.
    pub fn csi_seed(&self, trial: usize) -> u64 {
        derive_seed(self.master_seed, &[CSI_TAG, trial as u64])
    }
}

const SCHEME_TAG: u64 = 0;
const CHANNEL_TAG: u64 = 1;
const CSI_TAG: u64 = 2;

/// One point of a convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub outer: usize,
    /// Inner iteration within the outer iteration; `0` is its start.
    pub inner: usize,
    pub objective: f64,
    pub violation: f64,
}

/// Result of one (sweep point, scheme, trial).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: ExperimentKind,
    pub scheme: SchemeId,
    pub sweep_value: f64,
    pub trial_index: usize,
    pub seed: u64,
    pub msr_bits: f64,
    /// Worst-case LU/EVE correlation at the final positions; NaN when every
    /// channel vector vanishes.
    pub rho_cc: f64,
    pub violation: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub wall_time_ms: f64,
    /// Final positions. Not part of the CSV.
    pub positions: Vec<f64>,
    /// Objective trace; filled only by the convergence experiment. Not part
    /// of the CSV.
    pub trace: Vec<TracePoint>,
}

struct Task {
    sweep: usize,
    scheme: usize,
    trial: usize,
}

/// Runs every (sweep point, scheme, trial) and returns the rows in that
/// order, independent of the worker count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, masec_core::Error> {
    spec.validate()?;
    let tasks: Vec<Task> = (0..spec.sweep_values.len())
        .flat_map(|sweep| {
            (0..spec.schemes.len())
                .flat_map(move |scheme| (0..spec.trials).map(move |trial| Task { sweep, scheme, trial }))
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.workers)
        .build()
        .map_err(|e| masec_core::Error::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| tasks.par_iter().map(|t| run_task(spec, t)).collect())
}

fn run_task(spec: &ExperimentSpec, task: &Task) -> Result<ResultRow, masec_core::Error> {
    let value = spec.sweep_values[task.sweep];
    let scheme = spec.schemes[task.scheme];
    let (config, csi) = spec.experiment.bind(&spec.base_config, &spec.csi, value);
    let seed = spec.child_seed(task.sweep, task.scheme, task.trial);
    let truth = sample_channels(&config, spec.channel_seed(task.trial))?;
    let estimate = if csi == CsiErrorParams::default() {
        truth.clone()
    } else {
        perturb_csi(&truth, &csi, spec.csi_seed(task.trial))?
    };
    let start = Instant::now();
    let result = run_scheme(scheme, &config, &estimate, seed, &spec.solver)?;
    let wall_time_ms = if spec.record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    let trace = if spec.experiment == ExperimentKind::Convergence {
        result
            .trace
            .outer
            .iter()
            .enumerate()
            .flat_map(|(j, o)| {
                std::iter::once(o.inner.start_objective)
                    .chain(o.inner.objectives())
                    .enumerate()
                    .map(move |(k, objective)| TracePoint {
                        outer: j,
                        inner: k,
                        objective,
                        violation: o.violation,
                    })
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ResultRow {
        experiment: spec.experiment,
        scheme,
        sweep_value: value,
        trial_index: task.trial,
        seed,
        msr_bits: multicast_secrecy_rate(&result.weights, &result.positions, &truth),
        rho_cc: channel_correlation(&truth, &result.positions).unwrap_or(f64::NAN),
        violation: constraint_violation(&result.positions, &config.geometry()),
        inner_iters: result.trace.inner_iterations(),
        outer_iters: result.trace.outer_iterations(),
        wall_time_ms,
        positions: result.positions,
        trace,
    })
}

/// Mean of `metric` over trials for every (scheme, sweep value), in spec
/// order. NaN entries are skipped.
pub fn mean_by<F>(rows: &[ResultRow], metric: F) -> Vec<(SchemeId, f64, f64)>
where
    F: Fn(&ResultRow) -> f64,
{
    let mut out: Vec<(SchemeId, f64, f64, usize)> = Vec::new();
    for r in rows {
        let v = metric(r);
        let slot = out
            .iter()
            .position(|(s, x, _, _)| *s == r.scheme && x.to_bits() == r.sweep_value.to_bits());
        let i = match slot {
            Some(i) => i,
            None => {
                out.push((r.scheme, r.sweep_value, 0.0, 0));
                out.len() - 1
            }
        };
        if !v.is_nan() {
            out[i].2 += v;
            out[i].3 += 1;
        }
    }
    out.into_iter()
        .map(|(s, x, sum, n)| (s, x, if n == 0 { f64::NAN } else { sum / n as f64 }))
        .collect()
}

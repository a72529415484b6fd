//! Line-oriented experiment configuration.
//!
//! Every non-blank line is `key = value`; `#` starts a comment. Omitted keys
//! keep the reference-scenario defaults. Quantities may carry a unit
//! suffix:
//!
//! | key | units | default unit |
//! |---|---|---|
//! | `P_t` | `dBW`, `dBm`, `W` | W |
//! | `noise`, `noise_lu`, `noise_eve` | `dBm`, `dBW`, `W` | W |
//! | `g0` | `dB` | linear |
//! | `wavelength`, `D`, `d_min`, `d_max` | `m`, `lambda` (not for `wavelength`) | m |
//!
//! Lists (`schemes`, `sweep`) are comma separated.

use std::path::{Path, PathBuf};

use masec_core::baselines::SchemeId;
use masec_core::optimizer::{InitStrategy, StepSeedRule};
use masec_core::scenario::{db_to_linear, dbm_to_watts, dbw_to_watts, ScenarioConfig};

use crate::experiment::{ExperimentKind, ExperimentSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message} (at `{token}`)")]
    Syntax { line: usize, token: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Reads and validates an experiment file.
pub fn parse_config(path: &Path) -> Result<ExperimentSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config_str(&text)
}

/// Parses configuration text. An empty text yields the reference scenario
/// with the `convergence` experiment.
pub fn parse_config_str(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut experiment = ExperimentKind::Convergence;
    let mut config = ScenarioConfig::paper_default();
    let mut spec = ExperimentSpec::new(experiment, config.clone());
    let mut schemes: Option<Vec<SchemeId>> = None;
    let mut sweep: Option<Vec<f64>> = None;
    // Lengths given in wavelengths are resolved once the wavelength is known.
    let mut in_lambda: Vec<(&'static str, f64)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let err = |token: &str, message: String| ConfigError::Syntax {
            line,
            token: token.to_string(),
            message,
        };
        let Some((key, value)) = content.split_once('=') else {
            return Err(err(content, "expected `key = value`".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(err(key, format!("missing value for `{key}`")));
        }
        let q = || Quantity::parse(value).map_err(|m| err(value, m));
        let real = || -> Result<f64, ConfigError> { q()?.unitless().map_err(|m| err(value, m)) };
        let count = |what: &str, min: usize| -> Result<usize, ConfigError> {
            let v = real()?;
            if v.fract() != 0.0 || v < min as f64 || v > u32::MAX as f64 {
                return Err(err(value, format!("{what} must be an integer >= {min}")));
            }
            Ok(v as usize)
        };
        match key {
            "experiment" => experiment = value.parse().map_err(|e: crate::experiment::UnknownExperiment| err(value, e.to_string()))?,
            "schemes" => {
                schemes = Some(
                    split_list(value)
                        .map(|s| s.parse::<SchemeId>().map_err(|e| err(s, e.to_string())))
                        .collect::<Result<_, _>>()?,
                )
            }
            "sweep" => {
                sweep = Some(
                    split_list(value)
                        .map(|s| {
                            Quantity::parse(s)
                                .and_then(|q| q.unitless())
                                .map_err(|m| err(s, m))
                        })
                        .collect::<Result<_, _>>()?,
                )
            }
            "trials" => spec.trials = count("trials", 1)?,
            "seed" => spec.master_seed = value.parse().map_err(|_| err(value, "seed must be an unsigned 64-bit integer".into()))?,
            "output_dir" => spec.output_dir = PathBuf::from(value),
            "workers" => spec.workers = count("workers", 0)?,
            "record_timing" => spec.record_timing = parse_bool(value).map_err(|m| err(value, m))?,

            "L" => config.num_antennas = count("L", 2)?,
            "N_b" => config.num_lus = count("N_b", 1)?,
            "N_e" => config.num_eves = count("N_e", 1)?,
            "M_p" => config.num_paths = count("M_p", 1)?,
            "wavelength" => config.wavelength = q()?.length(false).map_err(|m| err(value, m))?.meters(),
            "D" | "d_min" | "d_max" => {
                let v = q()?.length(true).map_err(|m| err(value, m))?;
                let name: &'static str = match key {
                    "D" => "D",
                    "d_min" => "d_min",
                    _ => "d_max",
                };
                match v {
                    Length::Meters(m) => set_length(&mut config, name, m),
                    Length::Wavelengths(n) => in_lambda.push((name, n)),
                }
            }
            "P_t" => config.total_power = q()?.power().map_err(|m| err(value, m))?,
            "noise" => {
                let v = q()?.power().map_err(|m| err(value, m))?;
                config.noise_lu = v;
                config.noise_eve = v;
            }
            "noise_lu" => config.noise_lu = q()?.power().map_err(|m| err(value, m))?,
            "noise_eve" => config.noise_eve = q()?.power().map_err(|m| err(value, m))?,
            "g0" => config.ref_gain = q()?.gain().map_err(|m| err(value, m))?,
            "pathloss_exponent" => config.pathloss_exponent = real()?,
            "alpha" => config.lse_alpha = real()?,
            "nu" => spec.csi.max_aod_error = real()?,
            "chi" => spec.csi.gain_error_variance = real()?,

            "gamma0" => spec.solver.schedule.gamma = real()?,
            "gamma_min" => spec.solver.schedule.gamma_min = real()?,
            "gamma_decay" => spec.solver.schedule.gamma_decay = real()?,
            "rho0" => spec.solver.schedule.rho = real()?,
            "rho_decay" => spec.solver.schedule.rho_decay = real()?,
            "epsilon0" => spec.solver.schedule.epsilon = real()?,
            "epsilon_min" => spec.solver.schedule.epsilon_min = real()?,
            "epsilon_decay" => spec.solver.schedule.epsilon_decay = real()?,
            "violation_tol0" => spec.solver.schedule.violation_tol = real()?,
            "violation_tol_min" => spec.solver.schedule.violation_tol_min = real()?,
            "violation_tol_decay" => spec.solver.schedule.violation_tol_decay = real()?,
            "o_min" => spec.solver.schedule.step_floor = real()?,
            "max_outer" => spec.solver.schedule.max_outer_iters = count("max_outer", 1)?,
            "max_inner" => spec.solver.schedule.max_inner_iters = count("max_inner", 1)?,
            "random_starts" => spec.solver.schedule.random_starts = count("random_starts", 0)?,
            "probe_iters" => spec.solver.schedule.probe_iters = count("probe_iters", 0)?,
            "init" => {
                spec.solver.schedule.init = match value {
                    "uniform_grid" => InitStrategy::UniformGrid,
                    "random_phase" => InitStrategy::RandomPhase,
                    "matched_filter" => InitStrategy::MatchedFilter,
                    _ => return Err(err(value, "init must be uniform_grid, random_phase or matched_filter".into())),
                }
            }
            "tau" => spec.solver.line_search.tau = real()?,
            "step0" => spec.solver.line_search.initial_step = real()?,
            "armijo_c1" => spec.solver.line_search.sufficient_decrease = real()?,
            "iota1" => spec.solver.line_search.grow_after_one = real()?,
            "iota2" => spec.solver.line_search.grow_after_many = real()?,
            "r_max" => spec.solver.line_search.max_backtracks = count("r_max", 1)?,
            "step_seed_rule" => {
                spec.solver.line_search.seed_rule = match value {
                    "as_printed" => StepSeedRule::AsPrinted,
                    "shrink_on_backtrack" => StepSeedRule::ShrinkOnBacktrack,
                    _ => return Err(err(value, "step_seed_rule must be as_printed or shrink_on_backtrack".into())),
                }
            }
            "selection_iters" => spec.solver.selection_iters = count("selection_iters", 1)?,
            _ => return Err(err(key, format!("unknown key `{key}`"))),
        }
    }
    let lambda = config.wavelength;
    for (name, n) in in_lambda {
        set_length(&mut config, name, n * lambda);
    }
    spec.experiment = experiment;
    spec.schemes = schemes.unwrap_or_else(|| experiment.default_schemes());
    spec.sweep_values = sweep.unwrap_or_else(|| experiment.default_sweep(&config));
    spec.base_config = config;
    spec.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    Ok(spec)
}

fn set_length(config: &mut ScenarioConfig, name: &str, meters: f64) {
    match name {
        "D" => config.aperture = meters,
        "d_min" => config.distance_min = meters,
        _ => config.distance_max = meters,
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

/// A number with an optional unit suffix.
#[derive(Debug, Clone, PartialEq)]
struct Quantity {
    value: f64,
    unit: String,
}

enum Length {
    Meters(f64),
    Wavelengths(f64),
}

impl Length {
    fn meters(self) -> f64 {
        match self {
            Length::Meters(m) | Length::Wavelengths(m) => m,
        }
    }
}

impl Quantity {
    fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        let split = text
            .char_indices()
            .find(|&(i, c)| c.is_ascii_alphabetic() && !is_exponent(text, i))
            .map_or(text.len(), |(i, _)| i);
        let (num, unit) = text.split_at(split);
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| format!("`{}` is not a number", num.trim()))?;
        if !value.is_finite() {
            return Err("value must be finite".into());
        }
        Ok(Self {
            value,
            unit: unit.trim().to_string(),
        })
    }

    fn unitless(&self) -> Result<f64, String> {
        if self.unit.is_empty() {
            Ok(self.value)
        } else {
            Err(format!("unexpected unit `{}`", self.unit))
        }
    }

    fn power(&self) -> Result<f64, String> {
        match self.unit.as_str() {
            "" | "W" => Ok(self.value),
            "dBW" => Ok(dbw_to_watts(self.value)),
            "dBm" => Ok(dbm_to_watts(self.value)),
            u => Err(format!("unit `{u}` is not a power unit (dBW, dBm, W)")),
        }
    }

    fn gain(&self) -> Result<f64, String> {
        match self.unit.as_str() {
            "" => Ok(self.value),
            "dB" => Ok(db_to_linear(self.value)),
            u => Err(format!("unit `{u}` is not a gain unit (dB)")),
        }
    }

    fn length(&self, allow_lambda: bool) -> Result<Length, String> {
        match self.unit.as_str() {
            "" | "m" => Ok(Length::Meters(self.value)),
            "lambda" if allow_lambda => Ok(Length::Wavelengths(self.value)),
            u => Err(format!("unit `{u}` is not a length unit (m{})", if allow_lambda { ", lambda" } else { "" })),
        }
    }
}

/// `e`/`E` inside a number such as `1e-3` is not a unit.
fn is_exponent(text: &str, i: usize) -> bool {
    let b = text.as_bytes();
    matches!(b[i], b'e' | b'E')
        && i > 0
        && (b[i - 1].is_ascii_digit() || b[i - 1] == b'.')
        && b.get(i + 1).is_some_and(|c| c.is_ascii_digit() || *c == b'-' || *c == b'+')
}

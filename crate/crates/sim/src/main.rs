use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use masec_core::baselines::{run_scheme, SchemeId, SchemeOptions};
use masec_core::channel::sample_channels;
use masec_core::objective::{euclidean_gradient, smoothed_objective, BeamformerPoint, SmoothingParams, Surrogate};
use masec_core::oracles::{brute_force_ab, compare_gradients, finite_difference_gradient_split};
use masec_core::scenario::ScenarioConfig;
use masec_core::Complex64;
use masec_sim::experiment::{mean_by, ExperimentKind};
use masec_sim::{emit_chart, emit_csv, parse_config, run_experiment};

#[derive(Parser)]
#[command(name = "masec", version, about = "Movable-antenna secrecy-rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a configuration file.
    Run {
        config: PathBuf,
        /// Master seed (overrides the file).
        #[arg(long)]
        seed: Option<u64>,
        /// Trials per sweep point and scheme (overrides the file).
        #[arg(long)]
        trials: Option<usize>,
        /// Output directory (overrides the file).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated scheme tags (overrides the file).
        #[arg(long, value_delimiter = ',')]
        schemes: Option<Vec<String>>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
        /// Suppress the summary table.
        #[arg(long)]
        quiet: bool,
    },
    /// List the experiment tags and what they sweep.
    ListExperiments,
    /// Run the gradient and brute-force oracle checks.
    Check {
        #[arg(long)]
        quiet: bool,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seed,
            trials,
            out,
            schemes,
            workers,
            quiet,
        } => {
            let mut spec = parse_config(&config)?;
            if let Some(s) = seed {
                spec.master_seed = s;
            }
            if let Some(t) = trials {
                spec.trials = t;
            }
            if let Some(o) = out {
                spec.output_dir = o;
            }
            if let Some(list) = schemes {
                spec.schemes = list.iter().map(|s| s.parse::<SchemeId>()).collect::<Result<_, _>>()?;
            }
            if let Some(w) = workers {
                spec.workers = w;
            }
            let rows = run_experiment(&spec)?;
            std::fs::create_dir_all(&spec.output_dir)
                .with_context(|| format!("cannot create {}", spec.output_dir.display()))?;
            let tag = spec.experiment.tag();
            let csv = spec.output_dir.join(format!("{tag}.csv"));
            let svg = spec.output_dir.join(format!("{tag}.svg"));
            emit_csv(&rows, &csv)?;
            emit_chart(&rows, &svg)?;
            if !quiet {
                let metric: fn(&masec_sim::ResultRow) -> f64 = if spec.experiment == ExperimentKind::CorrelationVsL {
                    |r| r.rho_cc
                } else {
                    |r| r.msr_bits
                };
                println!("{tag}: {} rows ({} trials)", rows.len(), spec.trials);
                println!("{:<16} {:>14} {:>12}", "scheme", spec.experiment.sweep_label(), "mean");
                for (scheme, x, m) in mean_by(&rows, metric) {
                    println!("{:<16} {:>14} {:>12.4}", scheme.tag(), x, m);
                }
                println!("wrote {} and {}", csv.display(), svg.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ListExperiments => {
            let base = ScenarioConfig::paper_default();
            for k in ExperimentKind::ALL {
                let sweep: Vec<String> = k.default_sweep(&base).iter().map(f64::to_string).collect();
                println!("{:<20} sweeps {:<16} default [{}]", k.tag(), k.sweep_label(), sweep.join(", "));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { quiet } => check(quiet),
    }
}

/// Quick oracle suite: analytic vs finite-difference gradients and the
/// PCPM weights vs an exhaustive phase search.
fn check(quiet: bool) -> Result<ExitCode> {
    let mut failures = 0;
    let mut report = |name: &str, ok: bool, detail: String| {
        if !ok {
            failures += 1;
        }
        if !quiet || !ok {
            println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        }
    };

    let mut c = ScenarioConfig::paper_default();
    c.num_antennas = 8;
    c.num_lus = 2;
    c.num_eves = 2;
    c.num_paths = 3;
    let params = SmoothingParams::new(1.0, 0.01, 100.0)?;
    let g = c.geometry();
    let mut worst = 0.0f64;
    let mut all_ok = true;
    for seed in 0..20u64 {
        let ch = sample_channels(&c, seed)?;
        let point = BeamformerPoint::new(
            (0..8).map(|l| Complex64::cis(0.37 * (seed + 1) as f64 * l as f64)).collect(),
            (0..8).map(|l| 0.02 + 0.035 * l as f64).collect(),
        )?;
        let a = euclidean_gradient(&point, &ch, &params, &g)?;
        let n = finite_difference_gradient_split(
            |w, p| {
                smoothed_objective(
                    &BeamformerPoint {
                        weights: w.to_vec(),
                        positions: p.to_vec(),
                    },
                    &ch,
                    &params,
                    &g,
                )
            },
            &point.weights,
            &point.positions,
            1e-6,
            1e-7,
        )?;
        let r = compare_gradients((&a.0, &a.1), (&n.0, &n.1))?;
        worst = worst.max(r.max_rel_error);
        all_ok &= r.within(1e-6, 1e-9);
    }
    report("gradient vs finite differences (20 draws)", all_ok, format!("max rel error {worst:.2e}"));

    let mut c4 = c.clone();
    c4.num_antennas = 4;
    let positions: Vec<f64> = (0..4).map(|l| l as f64 * 0.5 * c4.wavelength).collect();
    let opts = SchemeOptions::default();
    let schedule = opts.schedule;
    let mut ratios = Vec::new();
    for seed in 0..5u64 {
        let ch = sample_channels(&c4, seed)?;
        let out = run_scheme(SchemeId::FpaAbUla, &c4, &ch, seed, &opts)?;
        let s = Surrogate::new(&ch, SmoothingParams::new(c4.lse_alpha, schedule.gamma_min, schedule.rho)?, c4.geometry());
        let (_, best) = brute_force_ab(&s, &positions, 16)?;
        ratios.push(s.value(&out.weights, &positions)? / best);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    report("PCPM weights vs 16-level exhaustive search (5 draws)", mean <= 1.05, format!("mean objective ratio {mean:.4}"));

    if failures > 0 {
        bail!("{failures} oracle check(s) failed");
    }
    Ok(ExitCode::SUCCESS)
}

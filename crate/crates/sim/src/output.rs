//! CSV and SVG writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use masec_core::baselines::SchemeId;

use crate::experiment::{mean_by, ExperimentKind, ResultRow};

pub const CSV_HEADER: [&str; 11] = [
    "experiment",
    "scheme",
    "sweep_value",
    "trial_index",
    "seed",
    "msr_bits",
    "rho_cc",
    "violation",
    "inner_iters",
    "outer_iters",
    "wall_time_ms",
];

#[derive(Debug, thiserror::Error)]
pub enum OutputError {
    #[error("no rows to write")]
    Empty,
    #[error("rows mix experiments `{0}` and `{1}`")]
    MixedExperiments(ExperimentKind, ExperimentKind),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}, record {record}: {message}")]
    Parse { path: PathBuf, record: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> OutputError + '_ {
    move |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes one CSV line per row under [`CSV_HEADER`]. Reals use the
/// shortest decimal form that parses back to the same value.
pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<(), OutputError> {
    if rows.is_empty() {
        return Err(OutputError::Empty);
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err(path))?;
    w.write_record(CSV_HEADER).map_err(csv_err(path))?;
    for r in rows {
        w.write_record([
            r.experiment.tag().to_string(),
            r.scheme.tag().to_string(),
            r.sweep_value.to_string(),
            r.trial_index.to_string(),
            r.seed.to_string(),
            r.msr_bits.to_string(),
            r.rho_cc.to_string(),
            r.violation.to_string(),
            r.inner_iters.to_string(),
            r.outer_iters.to_string(),
            r.wall_time_ms.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a file written by [`emit_csv`]. Positions and traces are not
/// stored in the CSV and come back empty.
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>, OutputError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(OutputError::Parse {
            path: path.to_path_buf(),
            record: 0,
            message: "unexpected header".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let bad = |m: String| OutputError::Parse {
            path: path.to_path_buf(),
            record: i + 1,
            message: m,
        };
        let field = |k: usize| rec.get(k).unwrap_or("");
        let real = |k: usize| field(k).parse::<f64>().map_err(|e| bad(format!("{}: {e}", CSV_HEADER[k])));
        let int = |k: usize| field(k).parse::<u64>().map_err(|e| bad(format!("{}: {e}", CSV_HEADER[k])));
        rows.push(ResultRow {
            experiment: field(0).parse().map_err(|e: crate::experiment::UnknownExperiment| bad(e.to_string()))?,
            scheme: field(1).parse::<SchemeId>().map_err(|e| bad(e.to_string()))?,
            sweep_value: real(2)?,
            trial_index: int(3)? as usize,
            seed: int(4)?,
            msr_bits: real(5)?,
            rho_cc: real(6)?,
            violation: real(7)?,
            inner_iters: int(8)? as usize,
            outer_iters: int(9)? as usize,
            wall_time_ms: real(10)?,
            positions: Vec::new(),
            trace: Vec::new(),
        });
    }
    Ok(rows)
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 7] = ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

struct Series {
    label: String,
    color: &'static str,
    points: Vec<(f64, f64)>,
    scatter: bool,
}

/// Renders the rows of one experiment as a standalone SVG.
///
/// Sweeps plot the per-scheme mean of `msr_bits` (`rho_cc` for the
/// correlation experiment) against the sweep value. The convergence
/// experiment plots the mean objective against the cumulative inner
/// iteration, and the position snapshot marks every antenna of trial 0.
pub fn emit_chart(rows: &[ResultRow], path: &Path) -> Result<(), OutputError> {
    let first = rows.first().ok_or(OutputError::Empty)?;
    if let Some(other) = rows.iter().find(|r| r.experiment != first.experiment) {
        return Err(OutputError::MixedExperiments(first.experiment, other.experiment));
    }
    let kind = first.experiment;
    let schemes: Vec<SchemeId> = rows.iter().fold(Vec::new(), |mut acc, r| {
        if !acc.contains(&r.scheme) {
            acc.push(r.scheme);
        }
        acc
    });
    let color = |s: SchemeId| COLORS[s.index() % COLORS.len()];
    let (series, x_label, y_label, log_x): (Vec<Series>, String, &str, bool) = match kind {
        ExperimentKind::Convergence => {
            let series = schemes
                .iter()
                .map(|&s| {
                    let mut sums: Vec<(f64, usize)> = Vec::new();
                    for r in rows.iter().filter(|r| r.scheme == s) {
                        for (k, t) in r.trace.iter().enumerate() {
                            if sums.len() <= k {
                                sums.push((0.0, 0));
                            }
                            sums[k].0 += t.objective;
                            sums[k].1 += 1;
                        }
                    }
                    Series {
                        label: s.tag().to_string(),
                        color: color(s),
                        points: sums.iter().enumerate().map(|(k, (v, n))| (k as f64, v / *n as f64)).collect(),
                        scatter: false,
                    }
                })
                .collect();
            (series, "iteration".to_string(), "mean surrogate objective", false)
        }
        ExperimentKind::PositionsSnapshot => {
            let series = schemes
                .iter()
                .enumerate()
                .map(|(i, &s)| Series {
                    label: s.tag().to_string(),
                    color: color(s),
                    points: rows
                        .iter()
                        .filter(|r| r.scheme == s && r.trial_index == 0)
                        .take(1)
                        .flat_map(|r| r.positions.iter().map(move |&p| (p, i as f64 + 1.0)))
                        .collect(),
                    scatter: true,
                })
                .collect();
            (series, "antenna position (m)".to_string(), "scheme", false)
        }
        _ => {
            let (metric, y_label): (fn(&ResultRow) -> f64, &str) = if kind == ExperimentKind::CorrelationVsL {
                (|r| r.rho_cc, "mean channel correlation")
            } else {
                (|r| r.msr_bits, "mean MSR (bit/s/Hz)")
            };
            let means = mean_by(rows, metric);
            let series = schemes
                .iter()
                .map(|&s| Series {
                    label: s.tag().to_string(),
                    color: color(s),
                    points: means.iter().filter(|m| m.0 == s).map(|m| (m.1, m.2)).collect(),
                    scatter: false,
                })
                .collect();
            (series, kind.sweep_label().to_string(), y_label, kind == ExperimentKind::AlphaSweep)
        }
    };
    let svg = render(kind.tag(), &series, &x_label, y_label, log_x);
    std::fs::write(path, svg).map_err(io_err(path))
}

fn render(title: &str, series: &[Series], x_label: &str, y_label: &str, log_x: bool) -> String {
    let tx = |x: f64| if log_x { x.max(f64::MIN_POSITIVE).log10() } else { x };
    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().map(|&(x, y)| (tx(x), y)))
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .collect();
    let range = |vals: &mut dyn Iterator<Item = f64>| {
        let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 * hi.abs().max(1.0) {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(&mut finite.iter().map(|p| p.0));
    let (mut y0, y1) = range(&mut finite.iter().map(|p| p.1));
    if y0 > 0.0 && y0 < 0.25 * y1 {
        y0 = 0.0;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=5 {
        let f = i as f64 / 5.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let px = LEFT + f * pw;
        let py = TOP + ph - f * ph;
        let xt = if log_x { format!("1e{xv:.1}") } else { format_tick(xv) };
        let _ = writeln!(
            s,
            r##"<line x1="{px:.1}" y1="{TOP}" x2="{px:.1}" y2="{:.1}" stroke="#ddd"/><text x="{px:.1}" y="{:.1}" text-anchor="middle">{xt}</text>"##,
            TOP + ph,
            TOP + ph + 16.0
        );
        let _ = writeln!(
            s,
            r##"<line x1="{LEFT}" y1="{py:.1}" x2="{:.1}" y2="{py:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            LEFT + pw,
            LEFT - 6.0,
            py + 4.0,
            format_tick(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 18.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = ser
            .points
            .iter()
            .filter(|(x, y)| tx(*x).is_finite() && y.is_finite())
            .map(|&(x, y)| (sx(x), sy(y)))
            .collect();
        if ser.scatter {
            for (x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="{}"/>"#, ser.color);
            }
        } else if !pts.is_empty() {
            let list: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
                list.join(" "),
                ser.color
            );
            for (x, y) in &pts {
                let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{}"/>"#, ser.color);
            }
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{}" stroke-width="3"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            ser.color,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

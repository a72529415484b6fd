//! Monte Carlo experiment harness for `masec-core`: configuration files,
//! seeded parallel trial execution, and CSV / SVG output.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{parse_config, parse_config_str, ConfigError};
pub use experiment::{run_experiment, ExperimentKind, ExperimentSpec, ResultRow, TracePoint};
pub use output::{emit_chart, emit_csv, read_csv, OutputError};

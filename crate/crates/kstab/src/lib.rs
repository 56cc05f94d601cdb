//! Scenario runner for the toric K-stability lab.
//!
//! A scenario names a Delzant polytope, a rational PL convex function and a
//! list of tasks; [`run_scenario`] executes them and [`emit_outputs`] writes
//! `report.json`, `traces/*.csv` and `plots/*.svg`.

use std::path::PathBuf;

pub mod report;
pub mod run;
pub mod scenario;
pub mod suite;

pub use report::{emit_outputs, write_svg_plot};
pub use run::{run_scenario, RunOptions, ScenarioResult, TaskResult};
pub use scenario::{parse_scenario, Scenario, Validated};

/// Schema version of `report.json`.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("parse error at byte {offset} (line {line}, column {column}): {msg}")]
    Parse { offset: usize, line: usize, column: usize, msg: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::Validation(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io { .. } => 5,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

/// Reads, validates, runs and writes one scenario; returns the result and
/// the directory that received the artifacts.
pub fn run_file(
    path: &std::path::Path,
    out: Option<PathBuf>,
    opts: &RunOptions,
) -> Result<(ScenarioResult, PathBuf), CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let v = parse_scenario(&text)?.validate()?;
    let dir = out.or_else(|| v.output_dir.clone()).unwrap_or_else(|| PathBuf::from("kstab-out").join(&v.name));
    let res = run_scenario(&v, opts)?;
    emit_outputs(&res, &dir)?;
    Ok((res, dir))
}

//! Scenario-driven front end for the coverage library: parses scenario
//! files, runs the analytic and simulated pipelines and writes CSV, JSON
//! and plot-script artifacts.

pub mod compare;
pub mod pipeline;
pub mod scenario;

use thiserror::Error;

/// Environment variable giving the default worker-thread count.
pub const THREADS_ENV: &str = "CELLCOV_THREADS";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("comparison failed: {0}")]
    Comparison(String),
}

impl CliError {
    /// 1 validation (and I/O), 2 numerical non-convergence, 3 comparison failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Comparison(_) => 3,
        }
    }
}

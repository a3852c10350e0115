//! Monte Carlo harness for the self-normalized max statistic: KS-distance
//! experiments against Gaussian references, rate sweeps with OLS trend
//! fits, CSV/JSON reporting, and file ingestion for external samples. All
//! randomness is sub-stream seeded, so results are bit-identical for any
//! worker count.

pub mod config;
pub mod experiment;
pub mod ingest;
pub mod ks;
pub mod report;

pub use config::{ExperimentConfig, Reference};
pub use experiment::{fit_rate, rate_sweep, run_ks_cell, CellDiagnostics, KSResult, RateFit};
pub use report::{emit_report, load_report, ReportRow};

use snstat_core::ErrorClass;

/// Harness-level failures, carrying the process exit class.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Core(#[from] snstat_core::CoreError),
    #[error("io: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse: {0}")]
    Parse(String),
}

impl HarnessError {
    pub fn config(msg: impl Into<String>) -> Self {
        HarnessError::Config(msg.into())
    }

    /// Process exit code: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Parse(_) => 2,
            HarnessError::Core(e) => match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Numerical => 3,
            },
            HarnessError::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

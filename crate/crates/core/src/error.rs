use alloc::string::String;
use core::fmt;

/// Coarse classification used by callers to map errors to exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    /// Invalid configuration or parameters supplied by the caller.
    Config,
    /// Degenerate data or a computation that cannot be completed numerically.
    Numerical,
}

/// Errors produced by the numeric layer.
#[derive(Clone, Debug, PartialEq)]
pub enum CoreError {
    /// A parameter is outside its admissible range.
    InvalidParameter { what: String },
    /// Two objects that must agree in dimension do not.
    DimensionMismatch { what: String, expected: usize, got: usize },
    /// A column (or the whole sample) carries no variation where some is required.
    DegenerateColumn { index: usize },
    /// Every coordinate of a statistic is degenerate.
    AllDegenerate,
    /// An iteration failed to converge or an internal monotonicity check failed.
    NonConvergence { context: String },
    /// A matrix is not positive semidefinite within the repair tolerance.
    NotPositiveSemidefinite { min_eigenvalue: f64 },
    /// An operation requiring closed-form marginals was asked of an unsupported source.
    AnalyticUnsupported { what: String },
}

impl CoreError {
    /// Which class of failure this is (configuration vs numerical).
    pub fn class(&self) -> ErrorClass {
        match self {
            CoreError::InvalidParameter { .. }
            | CoreError::DimensionMismatch { .. }
            | CoreError::AnalyticUnsupported { .. } => ErrorClass::Config,
            CoreError::DegenerateColumn { .. }
            | CoreError::AllDegenerate
            | CoreError::NonConvergence { .. }
            | CoreError::NotPositiveSemidefinite { .. } => ErrorClass::Numerical,
        }
    }

    pub(crate) fn invalid(what: impl Into<String>) -> Self {
        CoreError::InvalidParameter { what: what.into() }
    }
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::InvalidParameter { what } => write!(f, "invalid parameter: {what}"),
            CoreError::DimensionMismatch { what, expected, got } => {
                write!(f, "dimension mismatch for {what}: expected {expected}, got {got}")
            }
            CoreError::DegenerateColumn { index } => {
                write!(f, "column {index} is degenerate (zero variation)")
            }
            CoreError::AllDegenerate => write!(f, "all coordinates are degenerate"),
            CoreError::NonConvergence { context } => write!(f, "did not converge: {context}"),
            CoreError::NotPositiveSemidefinite { min_eigenvalue } => {
                write!(f, "matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")
            }
            CoreError::AnalyticUnsupported { what } => {
                write!(f, "closed-form evaluation unavailable: {what}")
            }
        }
    }
}

impl core::error::Error for CoreError {}

//! Experiment configuration: JSON-mirrored fields plus validation.

use serde::{Deserialize, Serialize};
use snstat_core::sampling::DistributionSpec;
use snstat_core::truncation::TruncationMode;

use crate::{HarnessError, Result};

/// Which Gaussian the empirical max distribution is compared against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Moment-matched: covariance n * Var(Y_1) from a truncated pilot.
    ZPrime,
    /// Correlation matrix of the raw coordinates.
    ZCorr,
    /// Closed-form product CDF; identity covariance only.
    ExactDiag,
}

fn default_grid_size() -> usize {
    4096
}

fn default_workers() -> usize {
    1
}

/// One experiment: a distribution, a grid of sample sizes, and the Monte
/// Carlo budget. JSON field names match the struct fields.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dist: DistributionSpec,
    pub n_grid: Vec<usize>,
    /// Replications per cell.
    #[serde(rename = "M")]
    pub m: usize,
    /// Reference-Gaussian draws per cell.
    #[serde(rename = "M_ref")]
    pub m_ref: usize,
    pub reference: Reference,
    pub truncation_mode: TruncationMode,
    pub master_seed: u64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dist.validate().map_err(HarnessError::Core)?;
        if self.n_grid.is_empty() {
            return Err(HarnessError::config("n_grid must not be empty"));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HarnessError::config("n_grid must be strictly increasing"));
        }
        if self.n_grid[0] == 0 {
            return Err(HarnessError::config("sample sizes must be positive"));
        }
        if self.m < 100 {
            return Err(HarnessError::config(format!(
                "M must be at least 100, got {}",
                self.m
            )));
        }
        if self.m_ref < self.m {
            return Err(HarnessError::config(format!(
                "M_ref must be at least M ({} < {})",
                self.m_ref, self.m
            )));
        }
        if self.grid_size < 64 {
            return Err(HarnessError::config(format!(
                "grid_size must be at least 64, got {}",
                self.grid_size
            )));
        }
        if self.workers == 0 {
            return Err(HarnessError::config("workers must be at least 1"));
        }
        if self.reference == Reference::ExactDiag && !self.dist.is_identity_covariance() {
            return Err(HarnessError::config(
                "exact_diag reference requires identity covariance",
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::io_err(path, e))?;
        Self::from_json(&text)
    }
}

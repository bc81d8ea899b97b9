use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CovarianceMode, DEFAULT_VARIANCE_FLOOR};
use crate::error::{Error, Result};

/// How the starting parameters are built when none are supplied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// The caller provides the initial model.
    UserSupplied,
    /// Random soft state labels on alive rows followed by one M-step.
    RandomResponsibility,
    /// Seeded farthest-point selection of distinct alive rows as means.
    SpreadMeans,
}

impl fmt::Display for InitStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitStrategy::UserSupplied => "user_supplied",
            InitStrategy::RandomResponsibility => "random_responsibility",
            InitStrategy::SpreadMeans => "spread_means",
        })
    }
}

/// Training controls. Defaults: 1000/10 iterations, relative tolerance 1e-4.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_iterations: usize,
    pub min_iterations: usize,
    pub rel_tolerance: f64,
    pub variance_floor: f64,
    pub seed: u64,
    pub init_strategy: InitStrategy,
    /// Structure of the model built by the initializer.
    pub covariance_mode: CovarianceMode,
    pub absorbing: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_iterations: 1000,
            min_iterations: 10,
            rel_tolerance: 1e-4,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            seed: 0,
            init_strategy: InitStrategy::SpreadMeans,
            covariance_mode: CovarianceMode::Full,
            absorbing: false,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.min_iterations == 0 {
            return Err(Error::InvalidConfig("iteration limits must be positive".into()));
        }
        if self.min_iterations > self.max_iterations {
            return Err(Error::InvalidConfig(format!(
                "min_iterations ({}) exceeds max_iterations ({})",
                self.min_iterations, self.max_iterations
            )));
        }
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance.is_finite()) {
            return Err(Error::InvalidConfig("rel_tolerance must be positive".into()));
        }
        if !(self.variance_floor > 0.0 && self.variance_floor.is_finite()) {
            return Err(Error::InvalidConfig("variance_floor must be positive".into()));
        }
        Ok(())
    }
}

impl fmt::Display for FitConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "max_iterations={} min_iterations={} rel_tolerance={:e} variance_floor={:e} seed={} init_strategy={} covariance_mode={} absorbing={}",
            self.max_iterations,
            self.min_iterations,
            self.rel_tolerance,
            self.variance_floor,
            self.seed,
            self.init_strategy,
            self.covariance_mode,
            self.absorbing
        )
    }
}

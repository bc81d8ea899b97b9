//! State-conditioned Gaussian observation densities, evaluated in log scale.
//!
//! With an absorbing last state the densities are overridden on the death
//! sentinel: living states emit the zero vector with probability 0, the
//! absorbing state emits it with probability 1 and emits nothing else.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{CovarianceMode, HmmModel, Sequence};

/// A Gaussian with its covariance factorized once for repeated evaluation.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    mean: DVector<f64>,
    /// Lower Cholesky factor (full) or the diagonal of standard deviations.
    factor: DMatrix<f64>,
    mode: CovarianceMode,
    log_norm: f64,
}

impl GaussianDensity {
    pub fn new(mean: &DVector<f64>, cov: &DMatrix<f64>, mode: CovarianceMode) -> Result<Self> {
        let d = mean.len();
        if cov.shape() != (d, d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: cov.nrows(),
            });
        }
        let (factor, log_det) = match mode {
            CovarianceMode::Full => {
                let chol = Cholesky::new(cov.clone())
                    .ok_or(Error::NotPositiveDefinite { state: None })?;
                let l = chol.unpack();
                let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
                (l, log_det)
            }
            CovarianceMode::Diagonal => {
                let var = cov.diagonal();
                if var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                    return Err(Error::NotPositiveDefinite { state: None });
                }
                let log_det = var.iter().map(|v| v.ln()).sum::<f64>();
                (DMatrix::from_diagonal(&var.map(f64::sqrt)), log_det)
            }
        };
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite { state: None });
        }
        Ok(GaussianDensity {
            mean: mean.clone(),
            factor,
            mode,
            log_norm: -0.5 * (d as f64 * (2.0 * PI).ln() + log_det),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// `L` with `L Lᵀ = C`; lower triangular (diagonal in diagonal mode).
    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn log_pdf(&self, y: &DVector<f64>) -> f64 {
        let diff = y - &self.mean;
        let maha = match self.mode {
            CovarianceMode::Full => {
                let z = self
                    .factor
                    .solve_lower_triangular(&diff)
                    .expect("Cholesky factor has a positive diagonal");
                z.norm_squared()
            }
            CovarianceMode::Diagonal => diff
                .iter()
                .zip(self.factor.diagonal().iter())
                .map(|(r, s)| (r / s) * (r / s))
                .sum(),
        };
        self.log_norm - 0.5 * maha
    }
}

/// `ln N(y; m, C)`. Diagonal mode reads only the diagonal of `C`.
pub fn log_gaussian_pdf(
    y: &DVector<f64>,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    mode: CovarianceMode,
) -> Result<f64> {
    if y.len() != mean.len() {
        return Err(Error::DimensionMismatch {
            expected: mean.len(),
            found: y.len(),
        });
    }
    Ok(GaussianDensity::new(mean, cov, mode)?.log_pdf(y))
}

/// Factorized densities of every living state of one model.
#[derive(Debug, Clone)]
pub struct StateDensities {
    densities: Vec<Option<GaussianDensity>>,
    obs_dim: usize,
}

impl StateDensities {
    pub fn new(model: &HmmModel) -> Result<Self> {
        let densities = (0..model.num_states())
            .map(|i| {
                if model.is_absorbing(i) {
                    return Ok(None);
                }
                GaussianDensity::new(&model.means[i], &model.covariances[i], model.covariance_mode)
                    .map(Some)
                    .map_err(|e| match e {
                        Error::NotPositiveDefinite { .. } => {
                            Error::NotPositiveDefinite { state: Some(i) }
                        }
                        other => other,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StateDensities {
            densities,
            obs_dim: model.obs_dim,
        })
    }

    /// `None` for the absorbing state.
    pub fn state(&self, i: usize) -> Option<&GaussianDensity> {
        self.densities[i].as_ref()
    }

    pub fn table(&self, seq: &Sequence) -> Result<EmissionTable> {
        if seq.obs_dim() != self.obs_dim {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim,
                found: seq.obs_dim(),
            });
        }
        let k = self.densities.len();
        let log = DMatrix::from_fn(seq.len(), k, |t, i| {
            let alive = seq.alive()[t];
            match (&self.densities[i], alive) {
                (Some(g), true) => g.log_pdf(&seq.observations()[t]),
                (Some(_), false) => f64::NEG_INFINITY,
                (None, true) => f64::NEG_INFINITY,
                (None, false) => 0.0,
            }
        });
        Ok(EmissionTable::from_log(log))
    }
}

/// Emission densities `b[t][i]` for one sequence (rows: time, columns: state).
///
/// Alongside the log table it keeps, per row, the maximum log density and
/// the row rescaled by it. The forward/backward passes run on the rescaled
/// rows and fold the offsets back into the scaling factors, so a single
/// very unlikely observation does not underflow.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionTable {
    log_density: DMatrix<f64>,
    offsets: Vec<f64>,
    scaled: DMatrix<f64>,
}

impl EmissionTable {
    /// Builds a table from log densities (`-inf` for impossible emissions).
    pub fn from_log(log_density: DMatrix<f64>) -> Self {
        let (t_len, k) = log_density.shape();
        let offsets: Vec<f64> = (0..t_len)
            .map(|t| {
                log_density
                    .row(t)
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let scaled = DMatrix::from_fn(t_len, k, |t, i| {
            if offsets[t] == f64::NEG_INFINITY {
                0.0
            } else {
                (log_density[(t, i)] - offsets[t]).exp()
            }
        });
        EmissionTable {
            log_density,
            offsets,
            scaled,
        }
    }

    pub fn len(&self) -> usize {
        self.log_density.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn num_states(&self) -> usize {
        self.log_density.ncols()
    }

    pub fn log_density(&self) -> &DMatrix<f64> {
        &self.log_density
    }

    /// Linear densities `p_i(y(t))`; may underflow to 0 for extreme observations.
    pub fn density(&self) -> DMatrix<f64> {
        self.log_density.map(f64::exp)
    }

    /// Row maxima of the log table.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    /// `exp(log b[t][i] - offset[t])`, each row's maximum is 1 (or the row is all zero).
    pub fn scaled(&self) -> &DMatrix<f64> {
        &self.scaled
    }
}

/// Emission table of one sequence under `model`.
pub fn emission_table(model: &HmmModel, seq: &Sequence) -> Result<EmissionTable> {
    StateDensities::new(model)?.table(seq)
}

//! Model parameters, datasets and their file formats.
//!
//! Transitions follow the "to given from" convention: `transitions[(i, j)]`
//! is the probability of moving to state `i` from state `j`, so every
//! column sums to one. When the model has an absorbing state it is always
//! the last one.

mod align;
mod config;
mod dataset;
mod document;
mod init;

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub use align::align_states;
pub use config::{FitConfig, InitStrategy};
pub use dataset::{read_paths, write_paths, Dataset, Sequence, StatePath};
pub use document::{load_model, model_from_str, model_to_string, save_model};
pub use init::init_model;

/// Tolerance used for sum-to-one and symmetry checks.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Default lower bound added to covariance diagonals after each M-step.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceMode {
    Full,
    Diagonal,
}

impl fmt::Display for CovarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovarianceMode::Full => f.write_str("full"),
            CovarianceMode::Diagonal => f.write_str("diagonal"),
        }
    }
}

/// Gaussian-emission HMM parameters.
///
/// The mean and covariance of the absorbing state are placeholders: they are
/// never evaluated and never updated.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel {
    pub obs_dim: usize,
    pub initial_probs: DVector<f64>,
    /// `transitions[(to, from)]`; columns sum to one.
    pub transitions: DMatrix<f64>,
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub covariance_mode: CovarianceMode,
    /// When set, the last state is absorbing ("death").
    pub absorbing: bool,
}

/// A violated model invariant. State indices are 0-based and rendered 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape(String),
    NonFinite(String),
    InitialNegative { state: usize, value: f64 },
    InitialSum { sum: f64 },
    TransitionRange { to: usize, from: usize, value: f64 },
    ColumnSum { column: usize, sum: f64 },
    CovarianceAsymmetric { state: usize },
    CovarianceEigenvalue { state: usize, min_eigenvalue: f64, bound: f64 },
    DiagonalOffDiagonal { state: usize },
    AbsorbingTooFewStates,
    AbsorbingInitial { value: f64 },
    AbsorbingColumn { column: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape(s) => write!(f, "shape: {s}"),
            Violation::NonFinite(s) => write!(f, "non-finite value in {s}"),
            Violation::InitialNegative { state, value } => {
                write!(f, "π_{} is negative ({value})", state + 1)
            }
            Violation::InitialSum { sum } => write!(f, "π sums to {sum}"),
            Violation::TransitionRange { to, from, value } => {
                write!(f, "P[{}][{}] = {value} outside [0,1]", to + 1, from + 1)
            }
            Violation::ColumnSum { column, sum } => {
                write!(f, "column {} of P sums to {sum}", column + 1)
            }
            Violation::CovarianceAsymmetric { state } => {
                write!(f, "covariance {} is not symmetric", state + 1)
            }
            Violation::CovarianceEigenvalue {
                state,
                min_eigenvalue,
                bound,
            } => write!(
                f,
                "covariance {} has eigenvalue {min_eigenvalue:e} below {bound:e}",
                state + 1
            ),
            Violation::DiagonalOffDiagonal { state } => write!(
                f,
                "covariance {} has non-zero off-diagonal entries in diagonal mode",
                state + 1
            ),
            Violation::AbsorbingTooFewStates => {
                f.write_str("an absorbing state requires at least 2 states")
            }
            Violation::AbsorbingInitial { value } => {
                write!(f, "absorbing state has initial probability {value}, expected 0")
            }
            Violation::AbsorbingColumn { column } => {
                write!(f, "absorbing column {} not (0,...,0,1)", column + 1)
            }
        }
    }
}

impl HmmModel {
    pub fn num_states(&self) -> usize {
        self.initial_probs.len()
    }

    /// Index of the absorbing state (always the last one), if any.
    pub fn absorbing_state(&self) -> Option<usize> {
        if self.absorbing {
            Some(self.num_states() - 1)
        } else {
            None
        }
    }

    pub fn is_absorbing(&self, state: usize) -> bool {
        self.absorbing_state() == Some(state)
    }

    /// States that emit Gaussian observations.
    pub fn living_states(&self) -> std::ops::Range<usize> {
        let k = self.num_states();
        0..if self.absorbing { k - 1 } else { k }
    }

    /// Checks every structural invariant; covariances must be positive definite.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        validate_model(self)
    }

    /// Reorders states so that state `i` of the result is state `sigma[i]` of `self`.
    pub fn permuted(&self, sigma: &[usize]) -> HmmModel {
        let k = self.num_states();
        assert_eq!(sigma.len(), k, "permutation length must equal K");
        HmmModel {
            obs_dim: self.obs_dim,
            initial_probs: DVector::from_fn(k, |i, _| self.initial_probs[sigma[i]]),
            transitions: DMatrix::from_fn(k, k, |i, j| self.transitions[(sigma[i], sigma[j])]),
            means: sigma.iter().map(|&s| self.means[s].clone()).collect(),
            covariances: sigma.iter().map(|&s| self.covariances[s].clone()).collect(),
            covariance_mode: self.covariance_mode,
            absorbing: self.absorbing,
        }
    }

    /// Writes the exact constraints of an absorbing last state into `self`.
    pub(crate) fn impose_absorbing(&mut self) {
        if let Some(a) = self.absorbing_state() {
            self.initial_probs[a] = 0.0;
            for i in 0..self.num_states() {
                self.transitions[(i, a)] = if i == a { 1.0 } else { 0.0 };
            }
        }
    }
}

/// Returns `Ok(())` iff every invariant holds, otherwise every violation found.
pub fn validate_model(model: &HmmModel) -> Result<(), Vec<Violation>> {
    validate_with_floor(model, None)
}

/// Like [`validate_model`], but requires covariance eigenvalues to reach
/// `floor` (up to rounding) instead of merely being positive.
pub fn validate_with_floor(model: &HmmModel, floor: Option<f64>) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let k = model.num_states();
    let d = model.obs_dim;
    if k == 0 {
        out.push(Violation::Shape("K must be at least 1".into()));
        return Err(out);
    }
    if d == 0 {
        out.push(Violation::Shape("D must be at least 1".into()));
        return Err(out);
    }
    if model.transitions.shape() != (k, k) {
        out.push(Violation::Shape(format!(
            "transitions are {:?}, expected ({k}, {k})",
            model.transitions.shape()
        )));
    }
    if model.means.len() != k || model.covariances.len() != k {
        out.push(Violation::Shape(format!(
            "{} means and {} covariances for K={k}",
            model.means.len(),
            model.covariances.len()
        )));
    }
    if !out.is_empty() {
        return Err(out);
    }
    for (i, m) in model.means.iter().enumerate() {
        if m.len() != d {
            out.push(Violation::Shape(format!("mean {} has length {}, expected {d}", i + 1, m.len())));
        }
    }
    for (i, c) in model.covariances.iter().enumerate() {
        if c.shape() != (d, d) {
            out.push(Violation::Shape(format!(
                "covariance {} is {:?}, expected ({d}, {d})",
                i + 1,
                c.shape()
            )));
        }
    }
    if !out.is_empty() {
        return Err(out);
    }

    if model.initial_probs.iter().any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite("π".into()));
    }
    if model.transitions.iter().any(|v| !v.is_finite()) {
        out.push(Violation::NonFinite("P".into()));
    }

    for (i, &p) in model.initial_probs.iter().enumerate() {
        if p < 0.0 {
            out.push(Violation::InitialNegative { state: i, value: p });
        }
    }
    let pi_sum: f64 = model.initial_probs.iter().sum();
    if (pi_sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        out.push(Violation::InitialSum { sum: pi_sum });
    }

    for j in 0..k {
        for i in 0..k {
            let v = model.transitions[(i, j)];
            if !(0.0..=1.0).contains(&v) {
                out.push(Violation::TransitionRange { to: i, from: j, value: v });
            }
        }
        let sum: f64 = model.transitions.column(j).iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
            out.push(Violation::ColumnSum { column: j, sum });
        }
    }

    for i in model.living_states() {
        let c = &model.covariances[i];
        if model.means[i].iter().any(|v| !v.is_finite()) {
            out.push(Violation::NonFinite(format!("mean {}", i + 1)));
            continue;
        }
        if c.iter().any(|v| !v.is_finite()) {
            out.push(Violation::NonFinite(format!("covariance {}", i + 1)));
            continue;
        }
        let scale = c.amax().max(1.0);
        let asym = (c - c.transpose()).amax();
        if asym > PROBABILITY_TOLERANCE * scale {
            out.push(Violation::CovarianceAsymmetric { state: i });
        }
        if model.covariance_mode == CovarianceMode::Diagonal
            && (0..d).any(|r| (0..d).any(|s| r != s && c[(r, s)] != 0.0))
        {
            out.push(Violation::DiagonalOffDiagonal { state: i });
        }
        let sym = (c + c.transpose()) * 0.5;
        let min_eig = SymmetricEigen::new(sym).eigenvalues.min();
        match floor {
            Some(f) => {
                if min_eig < f - PROBABILITY_TOLERANCE * scale {
                    out.push(Violation::CovarianceEigenvalue {
                        state: i,
                        min_eigenvalue: min_eig,
                        bound: f,
                    });
                }
            }
            None => {
                if min_eig <= 0.0 {
                    out.push(Violation::CovarianceEigenvalue {
                        state: i,
                        min_eigenvalue: min_eig,
                        bound: 0.0,
                    });
                }
            }
        }
    }

    if model.absorbing {
        if k < 2 {
            out.push(Violation::AbsorbingTooFewStates);
        } else {
            let a = k - 1;
            if model.initial_probs[a] != 0.0 {
                out.push(Violation::AbsorbingInitial {
                    value: model.initial_probs[a],
                });
            }
            let exact = (0..k).all(|i| model.transitions[(i, a)] == if i == a { 1.0 } else { 0.0 });
            if !exact {
                out.push(Violation::AbsorbingColumn { column: a });
            }
        }
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

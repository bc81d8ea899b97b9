use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library. Indices are stored 0-based and rendered
/// 1-based in messages.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", format_violations(.0))]
    InvalidModel(Vec<Violation>),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("reserved zero vector on alive row (sequence {}, t={}): the all-zero observation marks death; jitter or re-encode the row", .sequence, .t + 1)]
    ReservedZeroRow { sequence: String, t: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("covariance{} is not positive definite", state_label(*.state))]
    NotPositiveDefinite { state: Option<usize> },

    #[error("zero-probability time step at {}: the observation is impossible under the model", location(*.sequence, *.t))]
    ZeroProbability { sequence: Option<usize>, t: usize },

    #[error("starved state {}: expected occupancy {:e} is too small; re-initialize (different seed or strategy)", .state + 1, .weight)]
    StarvedState { state: usize, weight: f64 },

    #[error("impossible sequence: every state path has zero probability from t={}", .t + 1)]
    ImpossiblePath { t: usize },

    #[error("instance too large for exhaustive enumeration: {paths} paths")]
    InstanceTooLarge { paths: f64 },

    #[error("iteration {iteration}: {source}")]
    Fit {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips iteration context added by the training loop.
    pub fn root(&self) -> &Error {
        match self {
            Error::Fit { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn at_sequence(self, n: usize) -> Error {
        match self {
            Error::ZeroProbability { sequence: None, t } => Error::ZeroProbability {
                sequence: Some(n),
                t,
            },
            other => other,
        }
    }
}

fn state_label(state: Option<usize>) -> String {
    state.map(|s| format!(" of state {}", s + 1)).unwrap_or_default()
}

fn location(sequence: Option<usize>, t: usize) -> String {
    match sequence {
        Some(n) => format!("(n={}, t={})", n + 1, t + 1),
        None => format!("t={}", t + 1),
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

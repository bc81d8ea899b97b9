//! Gaussian-emission hidden Markov models learned from many short,
//! independent observation sequences.
//!
//! Training pools the expected sufficient statistics of every sequence into
//! a single Baum-Welch M-step per iteration, using scaled forward/backward
//! recursions. Decoding is log-domain Viterbi. An optional absorbing last
//! state models death: dead time steps carry the all-zero observation.
//!
//! ```no_run
//! use msbw::{fit, decode_dataset, Dataset, FitConfig};
//!
//! let data = Dataset::read_csv(std::fs::File::open("data.csv")?)?;
//! let (model, report) = fit(&data, 3, &FitConfig::default(), None)?;
//! println!("{:?} after {} iterations", report.termination, report.iterations);
//! let decoded = decode_dataset(&model, &data);
//! # Ok::<(), msbw::Error>(())
//! ```

pub mod decoding;
pub mod emissions;
pub mod error;
pub mod inference;
pub mod model;
pub mod simulate;
pub mod training;

pub use decoding::{decode_dataset, viterbi, DecodeOutcome};
pub use error::{Error, Result};
pub use model::{
    align_states, init_model, load_model, save_model, validate_model, CovarianceMode, Dataset,
    FitConfig, HmmModel, InitStrategy, Sequence, StatePath,
};
pub use simulate::{sample_dataset, SimulationSpec};
pub use training::{e_step, fit, m_step, FitReport, SufficientStats, Termination};

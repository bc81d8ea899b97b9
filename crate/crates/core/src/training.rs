//! Multi-sequence Baum-Welch: pooled E-step, closed-form M-step and the
//! iteration driver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use crate::emissions::StateDensities;
use crate::error::{Error, Result};
use crate::inference::{sequence_posteriors, SequencePosteriors};
use crate::model::{
    init_model, validate_model, validate_with_floor, CovarianceMode, Dataset, FitConfig, HmmModel,
    InitStrategy, Sequence,
};

/// Relative occupancy below which a state counts as starved.
pub const STARVATION_THRESHOLD: f64 = 1e-12;

/// Expected sufficient statistics pooled over all sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub num_sequences: usize,
    pub covariance_mode: CovarianceMode,
    /// `sum_n gamma_n(1, i)`.
    pub gamma1_sum: DVector<f64>,
    /// `[(i, j)] = sum_n sum_t xi_n(t-1, t, j, i)`: expected transitions to `i` from `j`.
    pub xi_pool: DMatrix<f64>,
    /// `sum_n sum_t gamma_n(t, i)`.
    pub gamma_weight: DVector<f64>,
    /// `sum_n sum_t gamma_n(t, i) y_n(t)`.
    pub weighted_obs: Vec<DVector<f64>>,
    /// `sum_n sum_t gamma_n(t, i) y_n(t) y_n(t)^T`; only the diagonal in diagonal mode.
    pub weighted_sq: Vec<DMatrix<f64>>,
    /// `sum_n sum_t ln c_n(t)`.
    pub total_loglik: f64,
    pub total_timesteps: usize,
}

impl SufficientStats {
    pub fn zeros(num_states: usize, obs_dim: usize, covariance_mode: CovarianceMode) -> Self {
        SufficientStats {
            num_sequences: 0,
            covariance_mode,
            gamma1_sum: DVector::zeros(num_states),
            xi_pool: DMatrix::zeros(num_states, num_states),
            gamma_weight: DVector::zeros(num_states),
            weighted_obs: vec![DVector::zeros(obs_dim); num_states],
            weighted_sq: vec![DMatrix::zeros(obs_dim, obs_dim); num_states],
            total_loglik: 0.0,
            total_timesteps: 0,
        }
    }

    pub fn num_states(&self) -> usize {
        self.gamma1_sum.len()
    }

    /// Adds one observation with state responsibilities `weights`.
    pub(crate) fn add_row(&mut self, y: &DVector<f64>, weights: impl Iterator<Item = f64>) {
        let d = y.len();
        for (i, w) in weights.enumerate() {
            self.gamma_weight[i] += w;
            if w == 0.0 {
                continue;
            }
            self.weighted_obs[i].axpy(w, y, 1.0);
            let sq = &mut self.weighted_sq[i];
            match self.covariance_mode {
                CovarianceMode::Full => {
                    for c in 0..d {
                        for r in 0..d {
                            sq[(r, c)] += w * y[r] * y[c];
                        }
                    }
                }
                CovarianceMode::Diagonal => {
                    for r in 0..d {
                        sq[(r, r)] += w * y[r] * y[r];
                    }
                }
            }
        }
    }

    /// Adds the posteriors of one sequence.
    pub fn accumulate(&mut self, seq: &Sequence, post: &SequencePosteriors) {
        self.num_sequences += 1;
        self.total_timesteps += seq.len();
        self.total_loglik += post.loglik();
        self.gamma1_sum += post.gamma.row(0).transpose();
        self.xi_pool += &post.xi_sum;
        for (t, y) in seq.observations().iter().enumerate() {
            self.add_row(y, post.gamma.row(t).iter().copied());
        }
    }

    /// Adds another pool (e.g. from a later block of sequences).
    pub fn merge(&mut self, other: &SufficientStats) {
        self.num_sequences += other.num_sequences;
        self.total_timesteps += other.total_timesteps;
        self.total_loglik += other.total_loglik;
        self.gamma1_sum += &other.gamma1_sum;
        self.xi_pool += &other.xi_pool;
        self.gamma_weight += &other.gamma_weight;
        for (a, b) in self.weighted_obs.iter_mut().zip(&other.weighted_obs) {
            *a += b;
        }
        for (a, b) in self.weighted_sq.iter_mut().zip(&other.weighted_sq) {
            *a += b;
        }
    }

    /// Log-likelihood per time step, `total_loglik / total_timesteps`.
    pub fn normalized_loglik(&self) -> f64 {
        self.total_loglik / self.total_timesteps as f64
    }
}

/// Pooled E-step over every sequence.
///
/// Sequences are processed in parallel on the current rayon pool; the
/// reduction runs in dataset order, so the result does not depend on the
/// number of threads.
pub fn e_step(model: &HmmModel, data: &Dataset) -> Result<SufficientStats> {
    if data.obs_dim() != model.obs_dim {
        return Err(Error::DimensionMismatch {
            expected: model.obs_dim,
            found: data.obs_dim(),
        });
    }
    let densities = StateDensities::new(model)?;
    let (k, d) = (model.num_states(), model.obs_dim);
    let parts: Vec<Result<SufficientStats>> = data
        .sequences()
        .par_iter()
        .enumerate()
        .map(|(n, seq)| {
            let post = sequence_posteriors(model, &densities, seq).map_err(|e| e.at_sequence(n))?;
            let mut stats = SufficientStats::zeros(k, d, model.covariance_mode);
            stats.accumulate(seq, &post);
            Ok(stats)
        })
        .collect();
    let mut pooled = SufficientStats::zeros(k, d, model.covariance_mode);
    for part in parts {
        pooled.merge(&part?);
    }
    Ok(pooled)
}

/// Re-estimates the parameters from pooled statistics.
///
/// The absorbing state (if any) keeps its exact constraints and its
/// placeholder mean and covariance.
pub fn m_step(stats: &SufficientStats, prev: &HmmModel, config: &FitConfig) -> Result<HmmModel> {
    let k = prev.num_states();
    let d = prev.obs_dim;
    if stats.num_states() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: stats.num_states(),
        });
    }
    if stats.weighted_obs.first().map(|m| m.len()) != Some(d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: stats.weighted_obs.first().map_or(0, |m| m.len()),
        });
    }
    if stats.num_sequences == 0 {
        return Err(Error::InvalidData("no sequences in the statistics".into()));
    }
    let threshold = STARVATION_THRESHOLD * stats.total_timesteps as f64;
    for i in prev.living_states() {
        let w = stats.gamma_weight[i];
        if !(w >= threshold && w > 0.0) {
            return Err(Error::StarvedState { state: i, weight: w });
        }
    }

    let n = stats.num_sequences as f64;
    let initial_probs = stats.gamma1_sum.map(|g| g / n);

    let mut transitions = DMatrix::zeros(k, k);
    for j in prev.living_states() {
        let col_sum: f64 = stats.xi_pool.column(j).iter().sum();
        if col_sum.is_nan() || col_sum <= 0.0 {
            return Err(Error::StarvedState {
                state: j,
                weight: col_sum,
            });
        }
        for i in 0..k {
            transitions[(i, j)] = stats.xi_pool[(i, j)] / col_sum;
        }
    }

    let mut means = prev.means.clone();
    let mut covariances = prev.covariances.clone();
    for i in prev.living_states() {
        let w = stats.gamma_weight[i];
        let mean = &stats.weighted_obs[i] / w;
        let raw = &stats.weighted_sq[i] / w - &mean * mean.transpose();
        covariances[i] = floored_covariance(raw, stats.covariance_mode, config.variance_floor);
        means[i] = mean;
    }

    let mut model = HmmModel {
        obs_dim: d,
        initial_probs,
        transitions,
        means,
        covariances,
        covariance_mode: stats.covariance_mode,
        absorbing: prev.absorbing,
    };
    model.impose_absorbing();
    Ok(model)
}

/// Symmetrizes, clears off-diagonals in diagonal mode, clips negative
/// rounding noise and adds `floor` to the diagonal.
fn floored_covariance(raw: DMatrix<f64>, mode: CovarianceMode, floor: f64) -> DMatrix<f64> {
    let d = raw.nrows();
    match mode {
        CovarianceMode::Diagonal => {
            DMatrix::from_diagonal(&raw.diagonal().map(|v| v.max(0.0) + floor))
        }
        CovarianceMode::Full => {
            let mut c = (&raw + raw.transpose()) * 0.5;
            let eig = SymmetricEigen::new(c.clone());
            if eig.eigenvalues.min() < 0.0 {
                let clipped = eig.eigenvalues.map(|v| v.max(0.0));
                c = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
                c = (&c + c.transpose()) * 0.5;
            }
            for r in 0..d {
                c[(r, r)] += floor;
            }
            c
        }
    }
}

/// Why training stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIterations,
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Termination::Converged => "converged",
            Termination::MaxIterations => "max_iterations",
        })
    }
}

/// One row of the training trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub llh: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Per-time-step log-likelihood of the starting model.
    pub initial_llh: f64,
    /// `llh[l-1]`: per-time-step log-likelihood of the model after `l` M-steps.
    pub llh: Vec<f64>,
    pub termination: Termination,
    /// Completed M-steps.
    pub iterations: usize,
}

impl FitReport {
    pub fn final_llh(&self) -> f64 {
        self.llh.last().copied().unwrap_or(self.initial_llh)
    }
}

/// Trains a `k`-state model. See [`fit_with_trace`].
pub fn fit(
    data: &Dataset,
    k: usize,
    config: &FitConfig,
    initial: Option<HmmModel>,
) -> Result<(HmmModel, FitReport)> {
    fit_with_trace(data, k, config, initial, |_, _| {})
}

/// Trains a `k`-state model, calling `trace` with the record and the new
/// model after every iteration.
///
/// The starting model is `initial` when given, otherwise built by
/// [`init_model`]. Each iteration performs one M-step followed by the
/// E-step of the new parameters, whose per-time-step log-likelihood is
/// `llh(l)`; `llh(0)` belongs to the starting model. Training stops after
/// iteration `l` when `l >= min_iterations` and
/// `llh(l) - llh(l-1) < rel_tolerance * |llh(l-1)|`, or at `max_iterations`.
/// The returned model is the last one evaluated, so its log-likelihood is
/// the final trace entry.
pub fn fit_with_trace(
    data: &Dataset,
    k: usize,
    config: &FitConfig,
    initial: Option<HmmModel>,
    mut trace: impl FnMut(&TraceRecord, &HmmModel),
) -> Result<(HmmModel, FitReport)> {
    config.validate()?;
    let mut model = match initial {
        Some(m) => {
            validate_model(&m).map_err(Error::InvalidModel)?;
            if m.num_states() != k {
                return Err(Error::InvalidConfig(format!(
                    "initial model has {} states, expected {k}",
                    m.num_states()
                )));
            }
            if m.obs_dim != data.obs_dim() {
                return Err(Error::DimensionMismatch {
                    expected: m.obs_dim,
                    found: data.obs_dim(),
                });
            }
            m
        }
        None if config.init_strategy == InitStrategy::UserSupplied => {
            return Err(Error::InvalidConfig(
                "init strategy user_supplied requires an initial model".into(),
            ))
        }
        None => init_model(data, k, config)?,
    };

    let wrap = |iteration: usize| move |e: Error| Error::Fit {
        iteration,
        source: Box::new(e),
    };

    let mut stats = e_step(&model, data).map_err(wrap(0))?;
    let initial_llh = stats.normalized_loglik();
    let mut prev = initial_llh;
    let mut llh = Vec::new();
    let mut termination = Termination::MaxIterations;
    for l in 1..=config.max_iterations {
        model = m_step(&stats, &model, config).map_err(wrap(l))?;
        validate_with_floor(&model, Some(config.variance_floor))
            .map_err(|v| wrap(l)(Error::InvalidModel(v)))?;
        stats = e_step(&model, data).map_err(wrap(l))?;
        let current = stats.normalized_loglik();
        let delta = current - prev;
        llh.push(current);
        trace(
            &TraceRecord {
                iteration: l,
                llh: current,
                delta,
            },
            &model,
        );
        if l >= config.min_iterations && delta < config.rel_tolerance * prev.abs() {
            termination = Termination::Converged;
            break;
        }
        prev = current;
    }
    let iterations = llh.len();
    Ok((
        model,
        FitReport {
            initial_llh,
            llh,
            termination,
            iterations,
        },
    ))
}

/// Per-time-step log-likelihood of `data` under `model` (one E-step, no update).
pub fn evaluate(model: &HmmModel, data: &Dataset) -> Result<f64> {
    Ok(e_step(model, data)?.normalized_loglik())
}

//! Scaled forward/backward recursions and the posteriors they yield.
//!
//! Forward variables are normalized to sum to one at every step; the
//! normalizer `c(t)` is the predictive density of `y(t)` given the past, so
//! `sum_t ln c(t)` is the sequence log-likelihood. The recursions run on the
//! row-rescaled emission table (see [`EmissionTable`]) and keep the scaling
//! factors in log form.
//!
//! Summation order is fixed (t outer, states ascending) so results are
//! reproducible run to run.

use nalgebra::{DMatrix, DVector};

use crate::emissions::{EmissionTable, StateDensities};
use crate::error::{Error, Result};
use crate::model::{HmmModel, Sequence};

/// Output of [`forward_scaled`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// `T x K`, each row sums to one.
    pub alpha_hat: DMatrix<f64>,
    /// Normalizers of the rescaled rows: `c(t) = norms[t] * exp(offsets[t])`.
    pub norms: Vec<f64>,
    /// `ln c(t)`.
    pub log_scales: Vec<f64>,
}

impl ForwardPass {
    /// Linear scaling factors `c(t)`; may underflow where `log_scales` does not.
    pub fn scales(&self) -> Vec<f64> {
        self.log_scales.iter().map(|l| l.exp()).collect()
    }
}

pub fn forward_scaled(
    table: &EmissionTable,
    initial: &DVector<f64>,
    transitions: &DMatrix<f64>,
) -> Result<ForwardPass> {
    let k = table.num_states();
    let t_len = table.len();
    assert_eq!(initial.len(), k, "initial distribution has wrong length");
    assert_eq!(transitions.shape(), (k, k), "transition matrix has wrong shape");

    let b = table.scaled();
    let mut alpha = DMatrix::zeros(t_len, k);
    let mut norms = Vec::with_capacity(t_len);
    let mut log_scales = Vec::with_capacity(t_len);
    let mut row = vec![0.0; k];
    for t in 0..t_len {
        for (i, r) in row.iter_mut().enumerate() {
            *r = if t == 0 {
                initial[i] * b[(0, i)]
            } else {
                let mut acc = 0.0;
                for j in 0..k {
                    acc += alpha[(t - 1, j)] * transitions[(i, j)];
                }
                b[(t, i)] * acc
            };
        }
        let c: f64 = row.iter().sum();
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::ZeroProbability { sequence: None, t });
        }
        for (i, r) in row.iter().enumerate() {
            alpha[(t, i)] = r / c;
        }
        norms.push(c);
        log_scales.push(c.ln() + table.offsets()[t]);
    }
    Ok(ForwardPass {
        alpha_hat: alpha,
        norms,
        log_scales,
    })
}

/// Scaled backward variables; `beta_hat[T-1][i] = 1`.
///
/// `beta_hat[t][i] = sum_j beta_hat[t+1][j] P[j][i] b[t+1][j] / c(t+1)`.
pub fn backward_scaled(
    table: &EmissionTable,
    transitions: &DMatrix<f64>,
    forward: &ForwardPass,
) -> DMatrix<f64> {
    let k = table.num_states();
    let t_len = table.len();
    let b = table.scaled();
    let mut beta = DMatrix::zeros(t_len, k);
    if t_len == 0 {
        return beta;
    }
    beta.row_mut(t_len - 1).fill(1.0);
    for t in (0..t_len - 1).rev() {
        let c = forward.norms[t + 1];
        for i in 0..k {
            let mut acc = 0.0;
            for j in 0..k {
                acc += beta[(t + 1, j)] * transitions[(j, i)] * b[(t + 1, j)];
            }
            beta[(t, i)] = acc / c;
        }
    }
    beta
}

/// Per-sequence E-step quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePosteriors {
    pub alpha_hat: DMatrix<f64>,
    pub beta_hat: DMatrix<f64>,
    /// `ln c(t)`.
    pub log_scales: Vec<f64>,
    /// `gamma[t][i] = Pr(x(t) = i | y(1..T))`.
    pub gamma: DMatrix<f64>,
    /// `xi_sum[(i, j)] = sum_{t>=2} Pr(x(t-1) = j, x(t) = i | y(1..T))`.
    pub xi_sum: DMatrix<f64>,
}

impl SequencePosteriors {
    pub fn loglik(&self) -> f64 {
        sequence_loglik(&self.log_scales)
    }

    pub fn scales(&self) -> Vec<f64> {
        self.log_scales.iter().map(|l| l.exp()).collect()
    }
}

pub fn posteriors(
    forward: ForwardPass,
    beta_hat: DMatrix<f64>,
    table: &EmissionTable,
    transitions: &DMatrix<f64>,
) -> SequencePosteriors {
    let k = table.num_states();
    let t_len = table.len();
    let gamma = forward.alpha_hat.component_mul(&beta_hat);
    let b = table.scaled();
    let mut xi_sum = DMatrix::zeros(k, k);
    for t in 1..t_len {
        let c = forward.norms[t];
        for i in 0..k {
            let tail = b[(t, i)] * beta_hat[(t, i)] / c;
            for j in 0..k {
                xi_sum[(i, j)] += forward.alpha_hat[(t - 1, j)] * transitions[(i, j)] * tail;
            }
        }
    }
    SequencePosteriors {
        alpha_hat: forward.alpha_hat,
        beta_hat,
        log_scales: forward.log_scales,
        gamma,
        xi_sum,
    }
}

/// Per-step pairwise posteriors, entry `t-1` holding `[(i, j)] = Pr(x(t-1)=j, x(t)=i | y)`
/// for `t = 1..T-1`. Same arithmetic as the accumulated form; for inspection and tests.
pub fn pairwise_posteriors(
    forward: &ForwardPass,
    beta_hat: &DMatrix<f64>,
    table: &EmissionTable,
    transitions: &DMatrix<f64>,
) -> Vec<DMatrix<f64>> {
    let k = table.num_states();
    let b = table.scaled();
    (1..table.len())
        .map(|t| {
            let c = forward.norms[t];
            DMatrix::from_fn(k, k, |i, j| {
                forward.alpha_hat[(t - 1, j)] * transitions[(i, j)] * (b[(t, i)] * beta_hat[(t, i)] / c)
            })
        })
        .collect()
}

/// `sum_t ln c(t)`, the log-likelihood of one sequence.
pub fn sequence_loglik(log_scales: &[f64]) -> f64 {
    log_scales.iter().sum()
}

/// Runs both recursions for one sequence.
pub fn sequence_posteriors(
    model: &HmmModel,
    densities: &StateDensities,
    seq: &Sequence,
) -> Result<SequencePosteriors> {
    let table = densities.table(seq)?;
    let forward = forward_scaled(&table, &model.initial_probs, &model.transitions)?;
    let beta = backward_scaled(&table, &model.transitions, &forward);
    Ok(posteriors(forward, beta, &table, &model.transitions))
}

/// Exhaustive path enumeration, used as a reference for the recursions.
pub mod oracle {
    use super::*;
    use crate::emissions::emission_table;

    pub const MAX_PATHS: f64 = 1e6;

    /// Posterior marginals computed by summing over every state path.
    #[derive(Debug, Clone)]
    pub struct BruteForcePosteriors {
        pub loglik: f64,
        pub gamma: DMatrix<f64>,
        /// Entry `t-1` is `[(i, j)] = Pr(x(t-1)=j, x(t)=i | y)`.
        pub xi: Vec<DMatrix<f64>>,
    }

    /// Calls `visit(path, log joint)` for every one of the `K^T` paths,
    /// in lexicographic order. The log joint is accumulated left to right as
    /// `ln pi + ln b(1) + (ln P + ln b(2)) + ...`.
    pub fn for_each_path(
        log_b: &DMatrix<f64>,
        initial: &DVector<f64>,
        transitions: &DMatrix<f64>,
        mut visit: impl FnMut(&[usize], f64),
    ) -> Result<()> {
        let (t_len, k) = log_b.shape();
        let paths = (k as f64).powi(t_len as i32);
        if paths > MAX_PATHS {
            return Err(Error::InstanceTooLarge { paths });
        }
        let mut path = vec![0usize; t_len];
        loop {
            let mut score = initial[path[0]].ln() + log_b[(0, path[0])];
            for t in 1..t_len {
                score = score + transitions[(path[t], path[t - 1])].ln() + log_b[(t, path[t])];
            }
            visit(&path, score);
            // increment, last position fastest
            let mut pos = t_len;
            loop {
                if pos == 0 {
                    return Ok(());
                }
                pos -= 1;
                path[pos] += 1;
                if path[pos] < k {
                    break;
                }
                path[pos] = 0;
            }
        }
    }

    fn log_sum_exp(xs: &[f64]) -> f64 {
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
    }

    pub fn brute_force_loglik(model: &HmmModel, seq: &Sequence) -> Result<f64> {
        let table = emission_table(model, seq)?;
        let mut scores = Vec::new();
        for_each_path(table.log_density(), &model.initial_probs, &model.transitions, |_, s| {
            scores.push(s)
        })?;
        Ok(log_sum_exp(&scores))
    }

    pub fn brute_force_posteriors(model: &HmmModel, seq: &Sequence) -> Result<BruteForcePosteriors> {
        let table = emission_table(model, seq)?;
        let mut paths = Vec::new();
        for_each_path(table.log_density(), &model.initial_probs, &model.transitions, |p, s| {
            paths.push((p.to_vec(), s))
        })?;
        let scores: Vec<f64> = paths.iter().map(|(_, s)| *s).collect();
        let loglik = log_sum_exp(&scores);
        let (t_len, k) = (seq.len(), model.num_states());
        let mut gamma = DMatrix::zeros(t_len, k);
        let mut xi = vec![DMatrix::zeros(k, k); t_len.saturating_sub(1)];
        for (p, s) in &paths {
            let w = (s - loglik).exp();
            if w == 0.0 {
                continue;
            }
            for t in 0..t_len {
                gamma[(t, p[t])] += w;
                if t > 0 {
                    xi[t - 1][(p[t], p[t - 1])] += w;
                }
            }
        }
        Ok(BruteForcePosteriors { loglik, gamma, xi })
    }
}

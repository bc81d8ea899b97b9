//! Log-domain Viterbi decoding.
//!
//! Ties are broken towards the smallest state index, both in the recursion
//! and at termination. Among equally probable paths this returns the one
//! whose reversed state sequence is lexicographically smallest (latest time
//! step compared first). Zero probabilities are `-inf`, never floored.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::emissions::{EmissionTable, StateDensities};
use crate::error::{Error, Result};
use crate::model::{Dataset, HmmModel, Sequence, StatePath};

/// Viterbi scores and backpointers for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ViterbiTrellis {
    /// `delta[(t, i)]`: best log joint probability of a path ending in `i` at `t`.
    pub delta: DMatrix<f64>,
    /// `psi[(t, i)]`: best predecessor of `i` at `t` (row 0 is unused and zero).
    pub psi: DMatrix<usize>,
}

impl ViterbiTrellis {
    /// Backtracks from the best final state. Errors if every path is impossible.
    pub fn best_path(&self) -> Result<(Vec<usize>, f64)> {
        let (t_len, _) = self.delta.shape();
        let (last, score) = argmax(self.delta.row(t_len - 1).iter().copied());
        if score == f64::NEG_INFINITY {
            let t = (0..t_len)
                .find(|&t| self.delta.row(t).iter().all(|v| *v == f64::NEG_INFINITY))
                .unwrap_or(t_len - 1);
            return Err(Error::ImpossiblePath { t });
        }
        let mut path = vec![0; t_len];
        path[t_len - 1] = last;
        for t in (0..t_len - 1).rev() {
            path[t] = self.psi[(t + 1, path[t + 1])];
        }
        Ok((path, score))
    }
}

/// First index holding the maximum (`-inf` only when every entry is `-inf`).
fn argmax(values: impl Iterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Fills the trellis: `delta(1,i) = ln pi_i + ln b_i(1)`,
/// `delta(t,i) = max_j [delta(t-1,j) + ln P_ij] + ln b_i(t)`.
pub fn viterbi_trellis(
    table: &EmissionTable,
    initial: &DVector<f64>,
    transitions: &DMatrix<f64>,
) -> ViterbiTrellis {
    let (t_len, k) = (table.len(), table.num_states());
    let log_b = table.log_density();
    let log_p = transitions.map(f64::ln);
    let mut delta = DMatrix::from_element(t_len, k, f64::NEG_INFINITY);
    let mut psi = DMatrix::zeros(t_len, k);
    for i in 0..k {
        delta[(0, i)] = initial[i].ln() + log_b[(0, i)];
    }
    for t in 1..t_len {
        for i in 0..k {
            let (j, best) = argmax((0..k).map(|j| delta[(t - 1, j)] + log_p[(i, j)]));
            psi[(t, i)] = j;
            delta[(t, i)] = best + log_b[(t, i)];
        }
    }
    ViterbiTrellis { delta, psi }
}

fn decode_with(model: &HmmModel, densities: &StateDensities, seq: &Sequence, n: usize) -> Result<StatePath> {
    let table = densities.table(seq)?;
    let trellis = viterbi_trellis(&table, &model.initial_probs, &model.transitions);
    let (states, _) = trellis.best_path()?;
    Ok(StatePath { sequence: n, states })
}

/// Most probable state path of one sequence (`sequence` index set to 0).
pub fn viterbi(model: &HmmModel, seq: &Sequence) -> Result<StatePath> {
    decode_with(model, &StateDensities::new(model)?, seq, 0)
}

/// A sequence that could not be decoded.
#[derive(Debug)]
pub struct DecodeFailure {
    pub sequence: usize,
    pub id: String,
    pub error: Error,
}

/// Paths for the decodable sequences (dataset order) and the failures.
#[derive(Debug)]
pub struct DecodeOutcome {
    pub paths: Vec<StatePath>,
    pub failures: Vec<DecodeFailure>,
}

/// Decodes every sequence; failures are collected rather than aborting.
pub fn decode_dataset(model: &HmmModel, data: &Dataset) -> DecodeOutcome {
    let densities = match StateDensities::new(model) {
        Ok(d) => d,
        Err(e) => {
            // the model itself is unusable: report it against every sequence
            let msg = e.to_string();
            return DecodeOutcome {
                paths: Vec::new(),
                failures: data
                    .sequences()
                    .iter()
                    .enumerate()
                    .map(|(n, s)| DecodeFailure {
                        sequence: n,
                        id: s.id().to_string(),
                        error: Error::InvalidConfig(msg.clone()),
                    })
                    .collect(),
            };
        }
    };
    let results: Vec<Result<StatePath>> = data
        .sequences()
        .par_iter()
        .enumerate()
        .map(|(n, seq)| decode_with(model, &densities, seq, n))
        .collect();
    let mut outcome = DecodeOutcome {
        paths: Vec::new(),
        failures: Vec::new(),
    };
    for (n, r) in results.into_iter().enumerate() {
        match r {
            Ok(p) => outcome.paths.push(p),
            Err(error) => outcome.failures.push(DecodeFailure {
                sequence: n,
                id: data.sequences()[n].id().to_string(),
                error,
            }),
        }
    }
    outcome
}

/// Exhaustive reference decoder.
pub mod oracle {
    use super::*;
    use crate::emissions::emission_table;
    use crate::inference::oracle::for_each_path;

    /// Best path over all `K^T` paths, scored with the same left-to-right
    /// sums as the trellis. Among exact ties it keeps the path that is
    /// smallest when compared from the last time step backwards.
    pub fn brute_force_path(model: &HmmModel, seq: &Sequence) -> Result<(Vec<usize>, f64)> {
        let table = emission_table(model, seq)?;
        let mut best: Option<(Vec<usize>, f64)> = None;
        for_each_path(table.log_density(), &model.initial_probs, &model.transitions, |p, s| {
            let better = match &best {
                None => true,
                Some((bp, bs)) => s > *bs || (s == *bs && p.iter().rev().lt(bp.iter().rev())),
            };
            if better {
                best = Some((p.to_vec(), s));
            }
        })?;
        let (path, score) = best.expect("at least one path");
        if score == f64::NEG_INFINITY {
            return Err(Error::ImpossiblePath { t: 0 });
        }
        Ok((path, score))
    }

    /// `ln pi + sum ln P + sum ln b` along `path`, accumulated independently.
    pub fn path_log_joint(model: &HmmModel, seq: &Sequence, path: &[usize]) -> Result<f64> {
        let table = emission_table(model, seq)?;
        let log_b = table.log_density();
        let pi_term = model.initial_probs[path[0]].ln();
        let mut trans_term = 0.0;
        let mut emit_term = 0.0;
        for (t, &s) in path.iter().enumerate() {
            emit_term += log_b[(t, s)];
            if t > 0 {
                trans_term += model.transitions[(s, path[t - 1])].ln();
            }
        }
        Ok(pi_term + trans_term + emit_term)
    }
}

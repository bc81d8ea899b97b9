//! Synthetic datasets drawn from a known model.
//!
//! Random stream: one `ChaCha8Rng` seeded with `seed`, consumed sequence by
//! sequence and step by step. Each step draws one uniform `f64` for the
//! state (inverse CDF over the initial distribution or the transition
//! column of the previous state), then, for emitting states, `D` standard
//! normals (`rand_distr::StandardNormal`) mapped through `m + L z` where `L`
//! is the covariance factor. Absorbing steps emit the zero vector and draw
//! no normals.

use nalgebra::{DVector, DVectorView};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::emissions::StateDensities;
use crate::error::{Error, Result};
use crate::model::{validate_model, Dataset, HmmModel, Sequence, StatePath};

#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub model: HmmModel,
    /// Length of every sequence; its length is N.
    pub lengths: Vec<usize>,
    pub seed: u64,
    pub emit_truth: bool,
}

impl SimulationSpec {
    /// `n` sequences of length `t`.
    pub fn uniform(model: HmmModel, n: usize, t: usize, seed: u64) -> Self {
        SimulationSpec {
            model,
            lengths: vec![t; n],
            seed,
            emit_truth: true,
        }
    }
}

fn draw_categorical(rng: &mut ChaCha8Rng, probs: DVectorView<'_, f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc && p > 0.0 {
            return i;
        }
    }
    // rounding left u above the last partial sum
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws a dataset (and the true state paths when `emit_truth`).
pub fn sample_dataset(spec: &SimulationSpec) -> Result<(Dataset, Option<Vec<StatePath>>)> {
    validate_model(&spec.model).map_err(Error::InvalidModel)?;
    if spec.lengths.is_empty() {
        return Err(Error::InvalidConfig("at least one sequence is required".into()));
    }
    if spec.lengths.contains(&0) {
        return Err(Error::InvalidConfig("sequence lengths must be positive".into()));
    }
    let model = &spec.model;
    let densities = StateDensities::new(model)?;
    let d = model.obs_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut sequences = Vec::with_capacity(spec.lengths.len());
    let mut truth = Vec::with_capacity(spec.lengths.len());
    for (n, &len) in spec.lengths.iter().enumerate() {
        let mut states = Vec::with_capacity(len);
        let mut rows = Vec::with_capacity(len);
        for t in 0..len {
            let state = if t == 0 {
                draw_categorical(&mut rng, model.initial_probs.column(0))
            } else {
                draw_categorical(&mut rng, model.transitions.column(states[t - 1]))
            };
            states.push(state);
            let y = match densities.state(state) {
                None => DVector::zeros(d),
                Some(g) => loop {
                    let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let y = g.mean() + g.factor() * z;
                    if y.iter().any(|v| *v != 0.0) {
                        break y;
                    }
                },
            };
            rows.push(y);
        }
        sequences.push(Sequence::new((n + 1).to_string(), rows)?);
        truth.push(StatePath { sequence: n, states });
    }
    let data = Dataset::new(sequences)?;
    Ok((data, spec.emit_truth.then_some(truth)))
}

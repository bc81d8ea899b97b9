use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, FitConfig, HmmModel, InitStrategy};
use crate::error::{Error, Result};
use crate::training::{m_step, SufficientStats};

/// Builds starting parameters from the data.
///
/// Both strategies use only alive rows for the emission parameters and are
/// deterministic given `config.seed`. With `config.absorbing` the last of
/// the `k` states is the absorbing one.
pub fn init_model(data: &Dataset, k: usize, config: &FitConfig) -> Result<HmmModel> {
    config.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig("K must be at least 1".into()));
    }
    if config.absorbing && k < 2 {
        return Err(Error::InvalidConfig(
            "an absorbing state requires K >= 2".into(),
        ));
    }
    let living = if config.absorbing { k - 1 } else { k };
    let rows: Vec<&DVector<f64>> = data.alive_rows().collect();
    if rows.is_empty() {
        return Err(Error::InvalidData("dataset has no alive observations".into()));
    }
    let d = data.obs_dim();
    let n_rows = rows.len() as f64;
    let pooled_mean = rows.iter().fold(DVector::zeros(d), |acc, y| acc + *y) / n_rows;
    let pooled_var = rows
        .iter()
        .fold(DVector::zeros(d), |acc: DVector<f64>, y| {
            acc + (*y - &pooled_mean).map(|v| v * v)
        })
        / n_rows;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    match config.init_strategy {
        InitStrategy::UserSupplied => Err(Error::InvalidConfig(
            "init strategy user_supplied takes the initial model from the caller".into(),
        )),
        InitStrategy::SpreadMeans => {
            let means = if living == 1 {
                vec![pooled_mean.clone()]
            } else {
                spread_means(&rows, &pooled_var, living, &mut rng)?
            };
            let cov = DMatrix::from_diagonal(&pooled_var.map(|v| v + config.variance_floor));
            let mut model = uniform_skeleton(k, d, config);
            for (i, m) in means.into_iter().enumerate() {
                model.means[i] = m;
                model.covariances[i] = cov.clone();
            }
            Ok(model)
        }
        InitStrategy::RandomResponsibility => {
            ensure_distinct(&rows, living)?;
            random_responsibility(data, k, living, config, &mut rng)
        }
    }
}

/// Uniform initial and transition probabilities (respecting the absorbing
/// constraints), placeholder emissions.
fn uniform_skeleton(k: usize, d: usize, config: &FitConfig) -> HmmModel {
    let living = if config.absorbing { k - 1 } else { k };
    let mut initial_probs = DVector::zeros(k);
    for i in 0..living {
        initial_probs[i] = 1.0 / living as f64;
    }
    let mut model = HmmModel {
        obs_dim: d,
        initial_probs,
        transitions: DMatrix::from_element(k, k, 1.0 / k as f64),
        means: vec![DVector::zeros(d); k],
        covariances: vec![DMatrix::identity(d, d); k],
        covariance_mode: config.covariance_mode,
        absorbing: config.absorbing,
    };
    model.impose_absorbing();
    model
}

fn ensure_distinct(rows: &[&DVector<f64>], count: usize) -> Result<()> {
    let mut distinct: Vec<&DVector<f64>> = Vec::new();
    for y in rows {
        if !distinct.iter().any(|x| x == y) {
            distinct.push(y);
            if distinct.len() >= count {
                return Ok(());
            }
        }
    }
    Err(Error::InvalidData(format!(
        "{count} emitting states requested but only {} distinct alive observations",
        distinct.len()
    )))
}

/// Seeded farthest-point selection: a random first row, then repeatedly the
/// row farthest (variance-standardized distance) from every chosen center.
fn spread_means(
    rows: &[&DVector<f64>],
    scale: &DVector<f64>,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<DVector<f64>>> {
    let weight = scale.map(|v| if v > 0.0 { 1.0 / v } else { 1.0 });
    let dist = |a: &DVector<f64>, b: &DVector<f64>| -> f64 {
        a.iter()
            .zip(b.iter())
            .zip(weight.iter())
            .map(|((x, y), w)| (x - y) * (x - y) * w)
            .sum()
    };
    let first = rng.random_range(0..rows.len());
    let mut centers = vec![rows[first].clone()];
    let mut nearest: Vec<f64> = rows.iter().map(|y| dist(y, &centers[0])).collect();
    while centers.len() < count {
        let (idx, far) = nearest
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        if far.is_nan() || far <= 0.0 {
            return Err(Error::InvalidData(format!(
                "{count} emitting states requested but only {} distinct alive observations",
                centers.len()
            )));
        }
        let c = rows[idx].clone();
        for (n, y) in nearest.iter_mut().zip(rows) {
            *n = n.min(dist(y, &c));
        }
        centers.push(c);
    }
    Ok(centers)
}

/// Random soft labels on alive rows (dead rows belong to the absorbing
/// state), turned into parameters by one M-step.
fn random_responsibility(
    data: &Dataset,
    k: usize,
    living: usize,
    config: &FitConfig,
    rng: &mut ChaCha8Rng,
) -> Result<HmmModel> {
    let d = data.obs_dim();
    let skeleton = uniform_skeleton(k, d, config);
    let mut stats = SufficientStats::zeros(k, d, config.covariance_mode);
    let mut transitions_seen = false;
    for seq in data.sequences() {
        let mut prev: Option<Vec<f64>> = None;
        for (t, y) in seq.observations().iter().enumerate() {
            let mut r = vec![0.0; k];
            if seq.alive()[t] {
                let mut total = 0.0;
                for w in r.iter_mut().take(living) {
                    *w = rng.random_range(0.05..1.0);
                    total += *w;
                }
                r.iter_mut().for_each(|w| *w /= total);
            } else {
                r[k - 1] = 1.0;
            }
            if t == 0 {
                for (g, w) in stats.gamma1_sum.iter_mut().zip(&r) {
                    *g += w;
                }
            }
            if let Some(p) = &prev {
                transitions_seen = true;
                for (i, ri) in r.iter().enumerate() {
                    for (j, pj) in p.iter().enumerate() {
                        stats.xi_pool[(i, j)] += ri * pj;
                    }
                }
            }
            stats.add_row(y, r.iter().copied());
            prev = Some(r);
        }
        stats.num_sequences += 1;
        stats.total_timesteps += seq.len();
    }
    if !transitions_seen {
        stats.xi_pool = DMatrix::from_element(k, k, 1.0);
    }
    m_step(&stats, &skeleton, config)
}

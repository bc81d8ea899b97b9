use super::HmmModel;
use crate::error::{Error, Result};

const MAX_ALIGN_STATES: usize = 20;

/// Finds the state relabelling that best matches `b` to `a`.
///
/// Returns `sigma` minimizing `sum_i |m_a[i] - m_b[sigma[i]]|^2`, so
/// `b.permuted(&sigma)` is aligned with `a`. The absorbing state maps to
/// itself. Exact (subset dynamic program), ties go to the lexicographically
/// smallest permutation.
pub fn align_states(a: &HmmModel, b: &HmmModel) -> Result<Vec<usize>> {
    let k = a.num_states();
    if b.num_states() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: b.num_states(),
        });
    }
    if a.obs_dim != b.obs_dim {
        return Err(Error::DimensionMismatch {
            expected: a.obs_dim,
            found: b.obs_dim,
        });
    }
    if a.absorbing != b.absorbing {
        return Err(Error::InvalidConfig(
            "cannot align a model with an absorbing state to one without".into(),
        ));
    }
    let living = a.living_states().len();
    if living > MAX_ALIGN_STATES {
        return Err(Error::InvalidConfig(format!(
            "state alignment supports at most {MAX_ALIGN_STATES} states"
        )));
    }

    let cost = |i: usize, j: usize| (&a.means[i] - &b.means[j]).norm_squared();

    // best[mask]: min cost of assigning a-states popcount(mask).. to the b-states outside mask.
    let full = (1usize << living) - 1;
    let mut best = vec![f64::INFINITY; 1 << living];
    best[full] = 0.0;
    for mask in (0..full).rev() {
        let i = mask.count_ones() as usize;
        let mut v = f64::INFINITY;
        for j in 0..living {
            if mask & (1 << j) == 0 {
                let c = cost(i, j) + best[mask | (1 << j)];
                if c < v {
                    v = c;
                }
            }
        }
        best[mask] = v;
    }

    let mut sigma = Vec::with_capacity(k);
    let mut mask = 0usize;
    for i in 0..living {
        let mut pick = None;
        let mut v = f64::INFINITY;
        for j in 0..living {
            if mask & (1 << j) == 0 {
                let c = cost(i, j) + best[mask | (1 << j)];
                if c < v {
                    v = c;
                    pick = Some(j);
                }
            }
        }
        let j = pick.expect("a free state remains");
        sigma.push(j);
        mask |= 1 << j;
    }
    if a.absorbing {
        sigma.push(k - 1);
    }
    Ok(sigma)
}

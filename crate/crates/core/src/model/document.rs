//! JSON model document.
//!
//! ```text
//! {
//!   "convention": "to_given_from_columns",
//!   "k": 2, "d": 1,
//!   "covariance_mode": "full",
//!   "absorbing_state": null,
//!   "pi": [..K],
//!   "transitions": [..K columns],   // transitions[j][i] = Pr(to i | from j)
//!   "means": [..K vectors of D],
//!   "covariances": [..K matrices, row-major nested arrays]
//! }
//! ```
//!
//! Reals are written with 17 significant digits so documents round-trip
//! exactly. `absorbing_state`, when present, is the 1-based index `k`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use super::dataset::format_real;
use super::{validate_model, CovarianceMode, HmmModel};
use crate::error::{Error, Result};

pub const CONVENTION: &str = "to_given_from_columns";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    convention: String,
    k: usize,
    d: usize,
    covariance_mode: CovarianceMode,
    absorbing_state: Option<usize>,
    pi: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<Vec<f64>>>,
}

fn real_array<'a>(values: impl Iterator<Item = &'a f64>) -> String {
    let items: Vec<String> = values.map(|&v| format_real(v)).collect();
    format!("[{}]", items.join(", "))
}

/// Renders a model document. Output is deterministic.
pub fn model_to_string(model: &HmmModel) -> String {
    let k = model.num_states();
    let d = model.obs_dim;
    let mut s = String::new();
    s.push_str("{\n");
    let _ = writeln!(s, "  \"convention\": \"{CONVENTION}\",");
    let _ = writeln!(s, "  \"k\": {k},");
    let _ = writeln!(s, "  \"d\": {d},");
    let _ = writeln!(s, "  \"covariance_mode\": \"{}\",", model.covariance_mode);
    match model.absorbing_state() {
        Some(a) => {
            let _ = writeln!(s, "  \"absorbing_state\": {},", a + 1);
        }
        None => s.push_str("  \"absorbing_state\": null,\n"),
    }
    let _ = writeln!(s, "  \"pi\": {},", real_array(model.initial_probs.iter()));
    let cols: Vec<String> = (0..k)
        .map(|j| format!("    {}", real_array(model.transitions.column(j).iter())))
        .collect();
    let _ = writeln!(s, "  \"transitions\": [\n{}\n  ],", cols.join(",\n"));
    let means: Vec<String> = model
        .means
        .iter()
        .map(|m| format!("    {}", real_array(m.iter())))
        .collect();
    let _ = writeln!(s, "  \"means\": [\n{}\n  ],", means.join(",\n"));
    let covs: Vec<String> = model
        .covariances
        .iter()
        .map(|c| {
            let rows: Vec<String> = (0..c.nrows())
                .map(|r| real_array(c.row(r).iter()))
                .collect();
            format!("    [{}]", rows.join(", "))
        })
        .collect();
    let _ = writeln!(s, "  \"covariances\": [\n{}\n  ]", covs.join(",\n"));
    s.push_str("}\n");
    s
}

/// Parses and validates a model document.
pub fn model_from_str(text: &str) -> Result<HmmModel> {
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("model document: {e}")))?;
    if doc.convention != CONVENTION {
        return Err(Error::Parse(format!(
            "unsupported transition convention {:?}, expected {CONVENTION:?}",
            doc.convention
        )));
    }
    let (k, d) = (doc.k, doc.d);
    if k == 0 || d == 0 {
        return Err(Error::Parse("k and d must be positive".into()));
    }
    let absorbing = match doc.absorbing_state {
        None => false,
        Some(a) if a == k => true,
        Some(a) => {
            return Err(Error::Parse(format!(
                "absorbing_state must be the last state ({k}), found {a}"
            )))
        }
    };
    let shape_err = |what: &str| Error::Parse(format!("model document: {what} has the wrong shape"));
    if doc.pi.len() != k {
        return Err(shape_err("pi"));
    }
    if doc.transitions.len() != k || doc.transitions.iter().any(|c| c.len() != k) {
        return Err(shape_err("transitions"));
    }
    if doc.means.len() != k || doc.means.iter().any(|m| m.len() != d) {
        return Err(shape_err("means"));
    }
    if doc.covariances.len() != k
        || doc
            .covariances
            .iter()
            .any(|c| c.len() != d || c.iter().any(|r| r.len() != d))
    {
        return Err(shape_err("covariances"));
    }
    let model = HmmModel {
        obs_dim: d,
        initial_probs: DVector::from_vec(doc.pi),
        transitions: DMatrix::from_fn(k, k, |i, j| doc.transitions[j][i]),
        means: doc.means.into_iter().map(DVector::from_vec).collect(),
        covariances: doc
            .covariances
            .iter()
            .map(|c| DMatrix::from_fn(d, d, |r, s| c[r][s]))
            .collect(),
        covariance_mode: doc.covariance_mode,
        absorbing,
    };
    validate_model(&model).map_err(Error::InvalidModel)?;
    Ok(model)
}

pub fn save_model(model: &HmmModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<HmmModel> {
    model_from_str(&fs::read_to_string(path)?)
}

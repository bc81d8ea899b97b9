use std::collections::HashSet;
use std::io::{Read, Write};

use nalgebra::DVector;

use crate::error::{Error, Result};

/// One observation sequence with its alive/dead mask.
///
/// The all-zero vector is reserved as the death sentinel: rows are alive
/// until the first all-zero row, and every later row must also be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    id: String,
    observations: Vec<DVector<f64>>,
    alive: Vec<bool>,
}

fn is_zero(row: &DVector<f64>) -> bool {
    row.iter().all(|&v| v == 0.0)
}

impl Sequence {
    /// Builds a sequence, deriving the alive mask from the death sentinel.
    pub fn new(id: impl Into<String>, observations: Vec<DVector<f64>>) -> Result<Self> {
        let id = id.into();
        if observations.is_empty() {
            return Err(Error::InvalidData(format!("sequence {id} is empty")));
        }
        let d = observations[0].len();
        if d == 0 {
            return Err(Error::InvalidData(format!("sequence {id} has zero-dimensional rows")));
        }
        let mut alive = Vec::with_capacity(observations.len());
        let mut dead = false;
        for (t, row) in observations.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidData(format!(
                    "non-finite observation in sequence {id} at t={}",
                    t + 1
                )));
            }
            if is_zero(row) {
                dead = true;
            } else if dead {
                // a zero row was followed by a living one
                let first_zero = alive.iter().position(|a| !a).unwrap_or(t);
                return Err(Error::ReservedZeroRow {
                    sequence: id,
                    t: first_zero,
                });
            }
            alive.push(!dead);
        }
        Ok(Sequence {
            id,
            observations,
            alive,
        })
    }

    /// Builds a sequence with an explicit mask, which must agree with the sentinel rule.
    pub fn with_mask(
        id: impl Into<String>,
        observations: Vec<DVector<f64>>,
        alive: Vec<bool>,
    ) -> Result<Self> {
        let seq = Sequence::new(id, observations)?;
        if seq.alive != alive {
            let t = seq
                .alive
                .iter()
                .zip(&alive)
                .position(|(a, b)| a != b)
                .unwrap_or(0);
            if alive.len() != seq.alive.len() {
                return Err(Error::InvalidData(format!(
                    "mask length {} does not match sequence length {}",
                    alive.len(),
                    seq.alive.len()
                )));
            }
            if alive[t] {
                return Err(Error::ReservedZeroRow { sequence: seq.id, t });
            }
            return Err(Error::InvalidData(format!(
                "sequence {} marked dead at t={} but the row is not the zero vector",
                seq.id,
                t + 1
            )));
        }
        Ok(seq)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn obs_dim(&self) -> usize {
        self.observations[0].len()
    }

    pub fn observations(&self) -> &[DVector<f64>] {
        &self.observations
    }

    pub fn alive(&self) -> &[bool] {
        &self.alive
    }

    /// First dead time step (0-based), if the sequence dies.
    pub fn death_time(&self) -> Option<usize> {
        self.alive.iter().position(|a| !a)
    }
}

/// N independent sequences sharing one observation dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    obs_dim: usize,
    sequences: Vec<Sequence>,
}

impl Dataset {
    pub fn new(sequences: Vec<Sequence>) -> Result<Self> {
        let first = sequences
            .first()
            .ok_or_else(|| Error::InvalidData("dataset has no sequences".into()))?;
        let obs_dim = first.obs_dim();
        for s in &sequences {
            if s.obs_dim() != obs_dim {
                return Err(Error::DimensionMismatch {
                    expected: obs_dim,
                    found: s.obs_dim(),
                });
            }
        }
        Ok(Dataset { obs_dim, sequences })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    pub fn num_sequences(&self) -> usize {
        self.sequences.len()
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn total_timesteps(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }

    /// All alive observation rows, in dataset order.
    pub fn alive_rows(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.sequences.iter().flat_map(|s| {
            s.observations
                .iter()
                .zip(&s.alive)
                .filter(|(_, a)| **a)
                .map(|(y, _)| y)
        })
    }

    /// Reads the delimited dataset format: header `seq_id,t,y_1..y_D`, one
    /// row per time step, sequences contiguous, `t` counting up from 1.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        if headers.len() < 3 || &headers[0] != "seq_id" || &headers[1] != "t" {
            return Err(Error::Parse(
                "dataset header must be seq_id,t,y_1,...,y_D".into(),
            ));
        }
        for (d, h) in headers.iter().skip(2).enumerate() {
            if h != format!("y_{}", d + 1) {
                return Err(Error::Parse(format!(
                    "dataset column {} is named {h:?}, expected y_{}",
                    d + 3,
                    d + 1
                )));
            }
        }
        let dim = headers.len() - 2;

        let mut sequences = Vec::new();
        let mut seen = HashSet::new();
        let mut current: Option<(String, Vec<DVector<f64>>)> = None;
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(csv_err)?;
            let line = line + 2;
            if record.len() != dim + 2 {
                return Err(Error::Parse(format!(
                    "line {line}: expected {} fields, found {}",
                    dim + 2,
                    record.len()
                )));
            }
            let id = record[0].to_string();
            let t: usize = record[1]
                .parse()
                .map_err(|_| Error::Parse(format!("line {line}: bad time index {:?}", &record[1])))?;
            let mut row = DVector::zeros(dim);
            for d in 0..dim {
                row[d] = record[d + 2].parse().map_err(|_| {
                    Error::Parse(format!("line {line}: bad value {:?}", &record[d + 2]))
                })?;
            }
            let same = matches!(&current, Some((cur, _)) if *cur == id);
            if !same {
                if let Some((cid, rows)) = current.take() {
                    sequences.push(Sequence::new(cid, rows)?);
                }
                if !seen.insert(id.clone()) {
                    return Err(Error::Parse(format!(
                        "line {line}: rows of sequence {id} are not consecutive"
                    )));
                }
                current = Some((id, Vec::new()));
            }
            let (cid, rows) = current.as_mut().expect("current sequence");
            if t != rows.len() + 1 {
                return Err(Error::Parse(format!(
                    "line {line}: sequence {cid} has t={t}, expected {}",
                    rows.len() + 1
                )));
            }
            rows.push(row);
        }
        if let Some((cid, rows)) = current.take() {
            sequences.push(Sequence::new(cid, rows)?);
        }
        Dataset::new(sequences)
    }

    /// Writes the dataset in the format read by [`Dataset::read_csv`].
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["seq_id".to_string(), "t".to_string()];
        header.extend((1..=self.obs_dim).map(|d| format!("y_{d}")));
        w.write_record(&header).map_err(csv_err)?;
        for s in &self.sequences {
            for (t, y) in s.observations.iter().enumerate() {
                let mut rec = vec![s.id.clone(), (t + 1).to_string()];
                rec.extend(y.iter().map(|&v| format_real(v)));
                w.write_record(&rec).map_err(csv_err)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// A decoded or simulated state trajectory; states are 0-based internally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatePath {
    /// Position of the sequence in its dataset.
    pub sequence: usize,
    pub states: Vec<usize>,
}

/// Writes `seq_id,t,state` rows with 1-based states.
pub fn write_paths<W: Write>(writer: W, data: &Dataset, paths: &[StatePath]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["seq_id", "t", "state"]).map_err(csv_err)?;
    for p in paths {
        let id = data.sequences[p.sequence].id();
        for (t, s) in p.states.iter().enumerate() {
            w.write_record([id.to_string(), (t + 1).to_string(), (s + 1).to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a `seq_id,t,state` file back into `(seq_id, 0-based states)` pairs.
pub fn read_paths<R: Read>(reader: R) -> Result<Vec<(String, Vec<usize>)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out: Vec<(String, Vec<usize>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        if record.len() != 3 {
            return Err(Error::Parse("path rows must have 3 fields".into()));
        }
        let state: usize = record[2]
            .parse()
            .map_err(|_| Error::Parse(format!("bad state {:?}", &record[2])))?;
        if state == 0 {
            return Err(Error::Parse("states are 1-based".into()));
        }
        match out.last_mut() {
            Some((id, states)) if id == &record[0] => states.push(state - 1),
            _ => out.push((record[0].to_string(), vec![state - 1])),
        }
    }
    Ok(out)
}

pub(crate) fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

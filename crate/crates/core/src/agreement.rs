//! Peer agreement: cosine similarity between two classifiers' predictive
//! distributions on the same sample.

use std::fmt::Write as _;
use std::io::Write;

use crate::numerics::cosine;
use crate::parallel;
use crate::{Error, Result};

/// `n × C` matrix of class-probability rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ProbMatrix {
    /// Validates that every row lies on the simplex (entries >= 0, sum 1 ± 1e-9).
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || cols < 2 {
            return Err(Error::Shape(format!(
                "probability matrix {rows}x{cols} with {} values",
                data.len()
            )));
        }
        for (r, row) in data.chunks(cols).enumerate() {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!(
                    "row {r} is not a probability vector"
                )));
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged probability rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Per-sample agreement scores between peers `peer_ids.0` and `peer_ids.1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementScores {
    pub scores: Vec<f64>,
    pub peer_ids: (usize, usize),
}

/// `scores[i] = cosine(a[i], b[i])`, clamped into `[0, 1]` against rounding.
pub fn agreement_scores(a: &ProbMatrix, b: &ProbMatrix) -> Result<Vec<f64>> {
    if a.rows != b.rows || a.cols != b.cols {
        return Err(Error::Shape(format!(
            "prediction matrices {}x{} and {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    parallel::map_range(a.rows, |r| cosine(a.row(r), b.row(r)).map(|s| s.clamp(0.0, 1.0)))
        .into_iter()
        .collect()
}

/// Agreement between two identified peers.
pub fn peer_agreement(
    a: &ProbMatrix,
    b: &ProbMatrix,
    peer_ids: (usize, usize),
) -> Result<AgreementScores> {
    Ok(AgreementScores {
        scores: agreement_scores(a, b)?,
        peer_ids,
    })
}

/// Writes `id,score` rows, where `ids[r]` names the sample behind score `r`.
pub fn write_scores_csv<W: Write>(ids: &[usize], scores: &[f64], mut out: W) -> std::io::Result<()> {
    let mut text = String::from("id,score\n");
    for (id, s) in ids.iter().zip(scores) {
        writeln!(text, "{id},{s:?}").unwrap();
    }
    out.write_all(text.as_bytes())?;
    out.flush()
}

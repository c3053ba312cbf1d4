//! Nonparametric comparison of several methods over several datasets:
//! per-dataset ranks, the Friedman test and the Nemenyi critical difference.

use std::io::BufRead;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::{Error, Result};

/// Per-dataset ranks (1 = best, ties averaged). `ranks[i][j]` is the rank of
/// method `j` on dataset `i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub ranks: Vec<Vec<f64>>,
}

impl RankTable {
    pub fn method_count(&self) -> usize {
        self.methods.len()
    }

    pub fn dataset_count(&self) -> usize {
        self.datasets.len()
    }

    /// Column sums `R_j`.
    pub fn rank_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.method_count()];
        for row in &self.ranks {
            for (s, r) in sums.iter_mut().zip(row) {
                *s += r;
            }
        }
        sums
    }

    pub fn mean_ranks(&self) -> Vec<f64> {
        let n = self.dataset_count() as f64;
        self.rank_sums().into_iter().map(|s| s / n).collect()
    }
}

/// Average ranks of one row; rank 1 goes to the best score.
pub fn rank_row(scores: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let o = scores[a].total_cmp(&scores[b]);
        if higher_is_better {
            o.reverse()
        } else {
            o
        }
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

pub fn rank_rows(
    methods: Vec<String>,
    datasets: Vec<String>,
    scores: &[Vec<f64>],
    higher_is_better: bool,
) -> Result<RankTable> {
    let k = methods.len();
    if k < 2 || scores.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 methods and 2 datasets (got {k} and {})",
            scores.len()
        )));
    }
    if datasets.len() != scores.len() {
        return Err(Error::Shape("dataset names do not match score rows".into()));
    }
    for (i, row) in scores.iter().enumerate() {
        if row.len() != k {
            return Err(Error::Shape(format!("row {i} has {} scores, expected {k}", row.len())));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite score in row {i}")));
        }
    }
    Ok(RankTable {
        methods,
        datasets,
        ranks: scores.iter().map(|r| rank_row(r, higher_is_better)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FriedmanResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    /// The χ² approximation is shaky for this few datasets or methods.
    pub small_sample: bool,
}

/// Below these sizes the χ² approximation is flagged as unreliable.
pub const MIN_RELIABLE_DATASETS: usize = 4;
pub const MIN_RELIABLE_METHODS: usize = 3;

/// `χ²_F = 12 / (N k (k+1)) · Σ R_j² − 3 N (k+1)` with `k − 1` degrees of freedom.
pub fn friedman(rt: &RankTable) -> Result<FriedmanResult> {
    let (n, k) = (rt.dataset_count(), rt.method_count());
    if n < 2 || k < 2 || rt.ranks.iter().any(|r| r.len() != k) {
        return Err(Error::Shape(format!("rank table {n}x{k} is too small or ragged")));
    }
    let (nf, kf) = (n as f64, k as f64);
    let sum_sq: f64 = rt.rank_sums().iter().map(|r| r * r).sum();
    let statistic = (12.0 / (nf * kf * (kf + 1.0)) * sum_sq - 3.0 * nf * (kf + 1.0)).max(0.0);
    let df = k - 1;
    Ok(FriedmanResult {
        statistic,
        degrees_of_freedom: df,
        p_value: chi_square_sf(statistic, df).max(f64::MIN_POSITIVE),
        small_sample: n < MIN_RELIABLE_DATASETS || k < MIN_RELIABLE_METHODS,
    })
}

/// Upper tail `P(X > x)` of the χ² distribution with `df` degrees of freedom.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if df == 2 {
        return (-x / 2.0).exp();
    }
    ChiSquared::new(df as f64)
        .map(|d| d.sf(x))
        .unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Alpha {
    #[serde(rename = "0.05")]
    P05,
    #[serde(rename = "0.10")]
    P10,
}

impl Alpha {
    pub fn from_f64(a: f64) -> Result<Self> {
        if (a - 0.05).abs() < 1e-9 {
            Ok(Alpha::P05)
        } else if (a - 0.10).abs() < 1e-9 {
            Ok(Alpha::P10)
        } else {
            Err(Error::UnsupportedAlpha(a))
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Alpha::P05 => 0.05,
            Alpha::P10 => 0.10,
        }
    }
}

// Two-tailed Nemenyi critical values q_α (studentized range / √2), k = 2..=10.
const Q_005: [f64; 9] = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
const Q_010: [f64; 9] = [1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920];

pub fn nemenyi_q(k: usize, alpha: Alpha) -> Result<f64> {
    if !(2..=10).contains(&k) {
        return Err(Error::UnsupportedMethodCount(k));
    }
    Ok(match alpha {
        Alpha::P05 => Q_005[k - 2],
        Alpha::P10 => Q_010[k - 2],
    })
}

/// `CD = q_α(k) · sqrt(k (k+1) / (6 N))`.
pub fn nemenyi_cd(k: usize, n: usize, alpha: Alpha) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one dataset".into()));
    }
    let q = nemenyi_q(k, alpha)?;
    Ok(q * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairComparison {
    pub a: String,
    pub b: String,
    pub rank_gap: f64,
    pub cd: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NemenyiResult {
    pub mean_ranks: Vec<f64>,
    pub cd: f64,
    pub pairs: Vec<PairComparison>,
}

/// Pairs `(a, b)` with `|mean_rank_a − mean_rank_b| >= cd` are significant.
pub fn compare_mean_ranks(methods: &[String], mean_ranks: &[f64], cd: f64) -> Vec<PairComparison> {
    let mut pairs = Vec::new();
    for a in 0..mean_ranks.len() {
        for b in a + 1..mean_ranks.len() {
            let gap = (mean_ranks[a] - mean_ranks[b]).abs();
            pairs.push(PairComparison {
                a: methods[a].clone(),
                b: methods[b].clone(),
                rank_gap: gap,
                cd,
                significant: gap >= cd,
            });
        }
    }
    pairs
}

pub fn nemenyi_pairwise(rt: &RankTable, alpha: Alpha) -> Result<NemenyiResult> {
    let cd = nemenyi_cd(rt.method_count(), rt.dataset_count(), alpha)?;
    let mean_ranks = rt.mean_ranks();
    let pairs = compare_mean_ranks(&rt.methods, &mean_ranks, cd);
    Ok(NemenyiResult {
        mean_ranks,
        cd,
        pairs,
    })
}

/// Parsed `dataset,method1,...,methodk` table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub scores: Vec<Vec<f64>>,
}

pub fn read_score_table<R: BufRead>(input: R) -> Result<ScoreTable> {
    let mut lines = input.lines();
    let header = match lines.next() {
        Some(l) => l.map_err(|e| Error::parse(1, e.to_string()))?,
        None => return Err(Error::parse(1, "missing header")),
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "dataset" {
        return Err(Error::parse(
            1,
            "expected header `dataset,method1,...,methodk` with k >= 2",
        ));
    }
    let methods: Vec<String> = cols[1..].iter().map(|s| s.to_string()).collect();
    let mut datasets = Vec::new();
    let mut scores = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != methods.len() + 1 {
            return Err(Error::parse(
                lineno,
                format!("expected {} columns, found {}", methods.len() + 1, f.len()),
            ));
        }
        datasets.push(f[0].to_string());
        let row = f[1..]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(lineno, format!("invalid score `{s}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        scores.push(row);
    }
    Ok(ScoreTable {
        methods,
        datasets,
        scores,
    })
}

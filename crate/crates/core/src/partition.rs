//! Clean/noisy partitioning of one-dimensional scores.
//!
//! Otsu's method is the primary splitter: an exhaustive search over the
//! interior edges of a uniform histogram on `[0, 1]` for the edge maximising
//! the between-class variance `w1·w2·(μ1 − μ2)²` (bin-centre means). K-Means
//! (k = 2) and a two-component Gaussian mixture are local alternates. The
//! high-score side is always the clean side.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DEFAULT_BINS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionMethod {
    Otsu,
    #[serde(rename = "kmeans")]
    KMeans,
    Gmm,
    Fixed,
}

impl PartitionMethod {
    pub fn name(self) -> &'static str {
        match self {
            PartitionMethod::Otsu => "otsu",
            PartitionMethod::KMeans => "kmeans",
            PartitionMethod::Gmm => "gmm",
            PartitionMethod::Fixed => "fixed",
        }
    }
}

impl fmt::Display for PartitionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PartitionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "otsu" => Ok(Self::Otsu),
            "kmeans" => Ok(Self::KMeans),
            "gmm" => Ok(Self::Gmm),
            "fixed" => Ok(Self::Fixed),
            other => Err(Error::InvalidArgument(format!(
                "unknown partition method `{other}`"
            ))),
        }
    }
}

/// Index split of a score vector. `clean ∪ noisy` covers every position and
/// the two lists are disjoint; both are sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub clean: Vec<usize>,
    pub noisy: Vec<usize>,
    pub threshold: Option<f64>,
    pub method: PartitionMethod,
}

impl Partition {
    fn from_mask(is_clean: impl Iterator<Item = bool>, threshold: Option<f64>, method: PartitionMethod) -> Self {
        let mut clean = Vec::new();
        let mut noisy = Vec::new();
        for (i, c) in is_clean.enumerate() {
            if c {
                clean.push(i);
            } else {
                noisy.push(i);
            }
        }
        Self {
            clean,
            noisy,
            threshold,
            method,
        }
    }

    /// Everything clean, no threshold.
    pub fn all_clean(n: usize, method: PartitionMethod) -> Self {
        Self {
            clean: (0..n).collect(),
            noisy: Vec::new(),
            threshold: None,
            method,
        }
    }

    pub fn len(&self) -> usize {
        self.clean.len() + self.noisy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Replaces positions with `ids[position]`, e.g. score rows with dataset
    /// sample indices. Order is preserved.
    pub fn map_indices(&self, ids: &[usize]) -> Partition {
        Partition {
            clean: self.clean.iter().map(|&p| ids[p]).collect(),
            noisy: self.noisy.iter().map(|&p| ids[p]).collect(),
            threshold: self.threshold,
            method: self.method,
        }
    }

    /// Smallest clean score when every clean score is >= every noisy score.
    fn upper_set_boundary(&self, scores: &[f64]) -> Option<f64> {
        let min_clean = self.clean.iter().map(|&i| scores[i]).reduce(f64::min)?;
        let max_noisy = self.noisy.iter().map(|&i| scores[i]).reduce(f64::max);
        match max_noisy {
            Some(m) if m >= min_clean => None,
            _ => Some(min_clean),
        }
    }
}

/// Uniform histogram over `[0, 1]`; a score of exactly 1 lands in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    counts: Vec<usize>,
}

impl Histogram {
    pub fn new(scores: &[f64], bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidArgument("histogram needs >= 2 bins".into()));
        }
        let mut counts = vec![0; bins];
        for &s in scores {
            counts[Self::bin_of(s, bins)?] += 1;
        }
        Ok(Self { counts })
    }

    pub fn bin_of(score: f64, bins: usize) -> Result<usize> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidArgument(format!(
                "score {score} outside [0, 1]"
            )));
        }
        Ok(((score * bins as f64) as usize).min(bins - 1))
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn edge(&self, j: usize) -> f64 {
        j as f64 / self.bins() as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        (b as f64 + 0.5) / self.bins() as f64
    }
}

/// Result of the exhaustive Otsu search.
#[derive(Debug, Clone, PartialEq)]
pub struct OtsuFit {
    /// `σ_B²` at every interior edge `j = 1..B-1` (index `j - 1`).
    pub between_class_variance: Vec<f64>,
    pub max_variance: f64,
    /// First and last edge index of the maximal plateau containing the first
    /// arg-max edge.
    pub plateau: (usize, usize),
    pub threshold: f64,
}

/// Exhaustive scan of all `B − 1` interior edges. Class 1 (noisy) holds bins
/// below the edge, class 2 (clean) bins at or above it.
pub fn otsu_fit(hist: &Histogram) -> Result<OtsuFit> {
    let bins = hist.bins();
    let n = hist.total() as f64;
    let counts = hist.counts();
    let total_mass: f64 = (0..bins).map(|b| counts[b] as f64 * hist.center(b)).sum();

    let mut sigma = Vec::with_capacity(bins - 1);
    let (mut below, mut below_mass) = (0usize, 0.0f64);
    for j in 1..bins {
        below += counts[j - 1];
        below_mass += counts[j - 1] as f64 * hist.center(j - 1);
        let above = hist.total() - below;
        if below == 0 || above == 0 {
            sigma.push(0.0);
            continue;
        }
        let (n1, n2) = (below as f64, above as f64);
        let mu1 = below_mass / n1;
        let mu2 = (total_mass - below_mass) / n2;
        sigma.push((n1 / n) * (n2 / n) * (mu1 - mu2) * (mu1 - mu2));
    }

    let (best, max) = sigma
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, v)| if v > acc.1 { (k, v) } else { acc });
    if !(max > 0.0) {
        return Err(Error::DegenerateScores);
    }
    let mut last = best;
    while last + 1 < sigma.len() && sigma[last + 1] == max {
        last += 1;
    }
    let plateau = (best + 1, last + 1);
    Ok(OtsuFit {
        between_class_variance: sigma,
        max_variance: max,
        plateau,
        threshold: (hist.edge(plateau.0) + hist.edge(plateau.1)) / 2.0,
    })
}

fn check_scores(scores: &[f64], min_len: usize) -> Result<()> {
    if scores.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "need at least {min_len} scores, got {}",
            scores.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("non-finite score".into()));
    }
    if scores.iter().all(|&s| s == scores[0]) {
        return Err(Error::DegenerateScores);
    }
    Ok(())
}

/// Otsu partition. On a plateau of maximal `σ_B²` the threshold is the
/// midpoint of the plateau; samples in bins at or above the plateau are clean.
pub fn otsu_threshold(scores: &[f64], bins: usize) -> Result<Partition> {
    check_scores(scores, 2)?;
    let hist = Histogram::new(scores, bins)?;
    let fit = otsu_fit(&hist)?;
    let cut = fit.plateau.0;
    let mut is_clean = Vec::with_capacity(scores.len());
    for &s in scores {
        is_clean.push(Histogram::bin_of(s, bins)? >= cut);
    }
    Ok(Partition::from_mask(
        is_clean.into_iter(),
        Some(fit.threshold),
        PartitionMethod::Otsu,
    ))
}

/// Linear-interpolation percentile (`q` in `[0, 1]`) of unsorted data.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn initial_centres(values: &[f64]) -> (f64, f64) {
    let (lo, hi) = (percentile(values, 0.1), percentile(values, 0.9));
    if lo < hi {
        (lo, hi)
    } else {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    }
}

/// Fitted 1-D two-means model.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// `[low, high]` centroids.
    pub centroids: [f64; 2],
    /// `true` where the sample belongs to the high centroid.
    pub assignment: Vec<bool>,
    /// Within-cluster sum of squares after each centroid update.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

/// Lloyd's algorithm with centroids started at the 10th/90th percentiles.
/// Stops when assignments are stable or after 100 iterations. Ties go to the
/// high (clean) centroid.
pub fn kmeans2_fit(values: &[f64]) -> Result<KMeansFit> {
    check_scores(values, 2)?;
    let (mut low, mut high) = initial_centres(values);
    let mut assignment: Vec<bool> = Vec::new();
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..100 {
        iterations += 1;
        let next: Vec<bool> = values
            .iter()
            .map(|&v| (v - high).abs() <= (v - low).abs())
            .collect();
        let stable = next == assignment;
        assignment = next;

        let (mut sum, mut count) = ([0.0; 2], [0usize; 2]);
        for (&v, &a) in values.iter().zip(&assignment) {
            sum[a as usize] += v;
            count[a as usize] += 1;
        }
        if count[0] > 0 {
            low = sum[0] / count[0] as f64;
        }
        if count[1] > 0 {
            high = sum[1] / count[1] as f64;
        }
        let inertia = values
            .iter()
            .zip(&assignment)
            .map(|(&v, &a)| (v - if a { high } else { low }).powi(2))
            .sum();
        trace.push(inertia);
        if stable {
            break;
        }
    }
    Ok(KMeansFit {
        centroids: [low, high],
        assignment,
        inertia_trace: trace,
        iterations,
    })
}

/// Clean = cluster with the larger centroid; threshold = centroid midpoint.
pub fn kmeans2_partition(scores: &[f64]) -> Result<Partition> {
    let fit = kmeans2_fit(scores)?;
    let boundary = 0.5 * (fit.centroids[0] + fit.centroids[1]);
    Ok(Partition::from_mask(
        fit.assignment.into_iter(),
        Some(boundary),
        PartitionMethod::KMeans,
    ))
}

pub const GMM_MAX_ITERATIONS: usize = 200;
pub const GMM_TOLERANCE: f64 = 1e-8;
pub const GMM_VARIANCE_FLOOR: f64 = 1e-6;

/// Two-component 1-D Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm2 {
    pub weights: [f64; 2],
    pub means: [f64; 2],
    pub variances: [f64; 2],
    /// Log-likelihood of the parameters entering each EM iteration.
    pub log_likelihood_trace: Vec<f64>,
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((x - mean).powi(2) / var + var.ln() + std::f64::consts::TAU.ln())
}

impl Gmm2 {
    fn log_joint(&self, x: f64) -> [f64; 2] {
        [0, 1].map(|k| self.weights[k].ln() + log_normal(x, self.means[k], self.variances[k]))
    }

    /// Posterior responsibilities `[p(k=0|x), p(k=1|x)]`.
    pub fn posterior(&self, x: f64) -> [f64; 2] {
        let lj = self.log_joint(x);
        let m = lj[0].max(lj[1]);
        let e = [(lj[0] - m).exp(), (lj[1] - m).exp()];
        let z = e[0] + e[1];
        [e[0] / z, e[1] / z]
    }

    /// Index of the component with the larger mean.
    pub fn upper(&self) -> usize {
        usize::from(self.means[1] > self.means[0])
    }

    pub fn log_likelihood(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .map(|&x| {
                let lj = self.log_joint(x);
                let m = lj[0].max(lj[1]);
                m + ((lj[0] - m).exp() + (lj[1] - m).exp()).ln()
            })
            .sum()
    }
}

/// EM fit: means from the 10th/90th percentiles, both variances at the sample
/// variance, equal weights; at most 200 iterations, stopping once the
/// log-likelihood improves by less than 1e-8; variances floored at 1e-6.
pub fn fit_gmm2(values: &[f64]) -> Result<Gmm2> {
    check_scores(values, 4)?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).max(GMM_VARIANCE_FLOOR);
    let (lo, hi) = initial_centres(values);
    let mut model = Gmm2 {
        weights: [0.5, 0.5],
        means: [lo, hi],
        variances: [var, var],
        log_likelihood_trace: Vec::new(),
    };

    let mut resp = vec![[0.0; 2]; values.len()];
    for _ in 0..GMM_MAX_ITERATIONS {
        let mut ll = 0.0;
        for (r, &x) in resp.iter_mut().zip(values) {
            let lj = model.log_joint(x);
            let m = lj[0].max(lj[1]);
            let e = [(lj[0] - m).exp(), (lj[1] - m).exp()];
            let z = e[0] + e[1];
            ll += m + z.ln();
            *r = [e[0] / z, e[1] / z];
        }
        let converged = model
            .log_likelihood_trace
            .last()
            .is_some_and(|prev| (ll - prev).abs() < GMM_TOLERANCE);
        model.log_likelihood_trace.push(ll);
        if converged {
            break;
        }

        for k in 0..2 {
            let nk: f64 = resp.iter().map(|r| r[k]).sum();
            if nk <= f64::MIN_POSITIVE {
                continue;
            }
            let mk = resp.iter().zip(values).map(|(r, x)| r[k] * x).sum::<f64>() / nk;
            let vk = resp
                .iter()
                .zip(values)
                .map(|(r, x)| r[k] * (x - mk).powi(2))
                .sum::<f64>()
                / nk;
            model.weights[k] = nk / n;
            model.means[k] = mk;
            model.variances[k] = vk.max(GMM_VARIANCE_FLOOR);
        }
    }
    Ok(model)
}

/// Clean = posterior of the higher-mean component >= 0.5.
pub fn gmm2_partition(scores: &[f64]) -> Result<Partition> {
    let model = fit_gmm2(scores)?;
    let upper = model.upper();
    let mut part = Partition::from_mask(
        scores.iter().map(|&s| model.posterior(s)[upper] >= 0.5),
        None,
        PartitionMethod::Gmm,
    );
    part.threshold = part.upper_set_boundary(scores);
    Ok(part)
}

/// Clean = `{i : s_i >= t}`.
pub fn partition_from_threshold(scores: &[f64], t: f64) -> Result<Partition> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("threshold {t} outside [0, 1]")));
    }
    Ok(Partition::from_mask(
        scores.iter().map(|&s| s >= t),
        Some(t),
        PartitionMethod::Fixed,
    ))
}

/// Dispatches to one of the clustering splitters.
pub fn partition_scores(scores: &[f64], method: PartitionMethod, bins: usize) -> Result<Partition> {
    match method {
        PartitionMethod::Otsu => otsu_threshold(scores, bins),
        PartitionMethod::KMeans => kmeans2_partition(scores),
        PartitionMethod::Gmm => gmm2_partition(scores),
        PartitionMethod::Fixed => Err(Error::InvalidArgument(
            "fixed partitioning needs an explicit threshold".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::derive_stream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn otsu_two_clumps() {
        let s = [0.1, 0.1, 0.9, 0.9];
        let p = otsu_threshold(&s, 10).unwrap();
        assert_eq!(p.clean, vec![2, 3]);
        assert_eq!(p.noisy, vec![0, 1]);
        let fit = otsu_fit(&Histogram::new(&s, 10).unwrap()).unwrap();
        // bin centres 0.15 and 0.95
        assert_abs_diff_eq!(fit.max_variance, 0.16, epsilon = 0.02);
        assert_eq!(fit.plateau, (2, 9));
        assert_abs_diff_eq!(p.threshold.unwrap(), 0.55, epsilon = 1e-15);
    }

    #[test]
    fn otsu_two_points() {
        let p = otsu_threshold(&[0.0, 1.0], DEFAULT_BINS).unwrap();
        assert_eq!(p.clean, vec![1]);
        assert_eq!(p.noisy, vec![0]);
    }

    #[test]
    fn otsu_degenerate() {
        assert!(matches!(
            otsu_threshold(&[0.7; 5], 16),
            Err(Error::DegenerateScores)
        ));
        // distinct scores inside one bin carry no histogram signal either
        assert!(matches!(
            otsu_threshold(&[0.700, 0.701], 16),
            Err(Error::DegenerateScores)
        ));
        assert!(otsu_threshold(&[0.5], 16).is_err());
        assert!(otsu_threshold(&[0.5, 1.5], 16).is_err());
    }

    #[test]
    fn kmeans_hand_example() {
        let fit = kmeans2_fit(&[0.1, 0.2, 0.8, 0.9]).unwrap();
        assert_abs_diff_eq!(fit.centroids[0], 0.15, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.centroids[1], 0.85, epsilon = 1e-12);
        // first pass assigns, second confirms stability
        assert_eq!(fit.iterations, 2);
        let p = kmeans2_partition(&[0.1, 0.2, 0.8, 0.9]).unwrap();
        assert_eq!(p.clean, vec![2, 3]);
        assert_eq!(kmeans2_partition(&[0.0, 1.0]).unwrap().clean, vec![1]);
    }

    #[test]
    fn kmeans_inertia_non_increasing() {
        let mut s = derive_stream(5, 5);
        let v: Vec<f64> = (0..500).map(|_| s.uniform().powi(3)).collect();
        let fit = kmeans2_fit(&v).unwrap();
        for w in fit.inertia_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn gmm_recovers_clumps() {
        let mut s = derive_stream(8, 1);
        let mut v = Vec::new();
        for _ in 0..200 {
            v.push(0.2 + 0.02 * s.normal());
        }
        for _ in 0..200 {
            v.push(0.8 + 0.02 * s.normal());
        }
        let model = fit_gmm2(&v).unwrap();
        let mut means = model.means;
        means.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(means[0], 0.2, epsilon = 0.02);
        assert_abs_diff_eq!(means[1], 0.8, epsilon = 0.02);
        for w in model.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10);
        }
        let p = gmm2_partition(&v).unwrap();
        assert_eq!(p.clean, (200..400).collect::<Vec<_>>());
    }

    #[test]
    fn gmm_point_masses() {
        let p = gmm2_partition(&[0.1, 0.1, 0.9, 0.9]).unwrap();
        assert_eq!(p.clean, vec![2, 3]);
        assert_eq!(p.threshold, Some(0.9));
        assert!(gmm2_partition(&[0.1, 0.9, 0.9]).is_err());
        assert!(matches!(gmm2_partition(&[0.4; 6]), Err(Error::DegenerateScores)));
    }

    #[test]
    fn fixed_threshold() {
        let s = [0.4, 0.5, 0.6];
        assert_eq!(partition_from_threshold(&s, 0.0).unwrap().clean, vec![0, 1, 2]);
        assert!(partition_from_threshold(&s, 1.0).unwrap().clean.is_empty());
        assert_eq!(partition_from_threshold(&s, 0.5).unwrap().clean, vec![1, 2]);
        assert!(partition_from_threshold(&s, 1.0 + 1e-9).is_err());
    }

    #[test]
    fn methods_agree_on_point_masses() {
        let mut s = vec![0.2; 30];
        s.extend(vec![0.95; 20]);
        let a = otsu_threshold(&s, DEFAULT_BINS).unwrap();
        let b = kmeans2_partition(&s).unwrap();
        let c = gmm2_partition(&s).unwrap();
        assert_eq!(a.clean, b.clean);
        assert_eq!(a.clean, c.clean);
        assert_eq!(a.clean, (30..50).collect::<Vec<_>>());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [PartitionMethod::Otsu, PartitionMethod::KMeans, PartitionMethod::Gmm, PartitionMethod::Fixed] {
            assert_eq!(m.name().parse::<PartitionMethod>().unwrap(), m);
        }
    }
}

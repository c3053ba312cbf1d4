//! Synthetic labelled datasets, label-noise injection, stratified splits and
//! the dataset CSV format.
//!
//! CSV layout (UTF-8, LF, rows ordered by id):
//!
//! ```text
//! id,f0,f1,...,f{d-1},clean_label,noisy_label
//! 0,0.123,...,2,4
//! ```
//!
//! Features are written in shortest round-trip form, so reading a written
//! file reproduces every value bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::numerics::{derive_stream, dot, purpose, stream_id, Matrix, RandomStream};
use crate::{Error, Result};

/// Upper bound on any per-sample flip probability.
pub const MAX_FLIP_PROBABILITY: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    clean_labels: Vec<usize>,
    noisy_labels: Vec<usize>,
    noise_mask: Vec<bool>,
    class_count: usize,
}

impl LabeledDataset {
    /// Builds a dataset, deriving the noise mask from the two label vectors.
    pub fn new(
        features: Matrix,
        clean_labels: Vec<usize>,
        noisy_labels: Vec<usize>,
        class_count: usize,
    ) -> Result<Self> {
        let n = features.rows();
        if n == 0 {
            return Err(Error::InvalidArgument("dataset must be non-empty".into()));
        }
        if class_count < 2 {
            return Err(Error::InvalidArgument("need at least two classes".into()));
        }
        if clean_labels.len() != n || noisy_labels.len() != n {
            return Err(Error::Shape(format!(
                "{n} feature rows but {} clean / {} noisy labels",
                clean_labels.len(),
                noisy_labels.len()
            )));
        }
        if let Some(&bad) = clean_labels
            .iter()
            .chain(&noisy_labels)
            .find(|&&l| l >= class_count)
        {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        let noise_mask = clean_labels
            .iter()
            .zip(&noisy_labels)
            .map(|(c, y)| c != y)
            .collect();
        Ok(Self {
            features,
            clean_labels,
            noisy_labels,
            noise_mask,
            class_count,
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn clean_labels(&self) -> &[usize] {
        &self.clean_labels
    }

    pub fn noisy_labels(&self) -> &[usize] {
        &self.noisy_labels
    }

    pub fn noise_mask(&self) -> &[bool] {
        &self.noise_mask
    }

    pub fn is_noise_free(&self) -> bool {
        !self.noise_mask.iter().any(|&m| m)
    }

    /// Fraction of samples whose label was flipped.
    pub fn noise_rate(&self) -> f64 {
        self.noise_mask.iter().filter(|&&m| m).count() as f64 / self.len() as f64
    }

    /// One-hot encoding of the observed (noisy) label of sample `i`.
    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.class_count];
        v[self.noisy_labels[i]] = 1.0;
        v
    }

    fn with_noisy_labels(&self, noisy_labels: Vec<usize>) -> Result<Self> {
        Self::new(
            self.features.clone(),
            self.clean_labels.clone(),
            noisy_labels,
            self.class_count,
        )
    }
}

/// Balanced Gaussian mixture: `class_count` means on a sphere of radius
/// `class_separation`, unit-variance isotropic noise around each.
pub fn generate_gaussian_mixture(
    n: usize,
    d: usize,
    class_count: usize,
    class_separation: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if class_count < 2 || n < class_count || d < 2 {
        return Err(Error::InvalidArgument(format!(
            "need n >= C >= 2 and d >= 2 (got n={n}, d={d}, C={class_count})"
        )));
    }
    if !(class_separation > 0.0 && class_separation.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "class_separation must be positive, got {class_separation}"
        )));
    }
    let mut rng = derive_stream(seed, stream_id(purpose::DATA, 0, 0));

    let means: Vec<Vec<f64>> = (0..class_count)
        .map(|_| {
            let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let norm = dot(&v, &v).sqrt().max(f64::MIN_POSITIVE);
            v.iter_mut().for_each(|x| *x *= class_separation / norm);
            v
        })
        .collect();

    let mut labels: Vec<usize> = (0..n).map(|i| i % class_count).collect();
    rng.shuffle(&mut labels);

    let mut data = Vec::with_capacity(n * d);
    for &y in &labels {
        data.extend(means[y].iter().map(|m| m + rng.normal()));
    }
    let features = Matrix::new(n, d, data)?;
    LabeledDataset::new(features, labels.clone(), labels, class_count)
}

fn check_noise_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate <= MAX_FLIP_PROBABILITY {
        Ok(())
    } else {
        Err(Error::NoiseRate(rate))
    }
}

fn require_noise_free(ds: &LabeledDataset) -> Result<()> {
    if ds.is_noise_free() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "noise injection expects a noise-free dataset".into(),
        ))
    }
}

fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Per-sample flip probabilities for instance-dependent noise.
///
/// `g(x) = logistic(w·x + b)` with a seed-drawn direction `w` (scaled to unit
/// variance over the dataset) and offset `b`; then
/// `q_i = λ · g(x_i) / mean(g)` clipped to `[0, 0.95]`. `λ = rate` unless the
/// clip engages, in which case `λ` is raised by bisection until the clipped
/// mean equals `rate` again.
pub fn idn_flip_probabilities(ds: &LabeledDataset, rate: f64, seed: u64) -> Result<Vec<f64>> {
    check_noise_rate(rate)?;
    let mut rng = derive_stream(seed, stream_id(purpose::IDN_NOISE, 0, 0));
    idn_probabilities_from(ds, rate, &mut rng)
}

fn idn_probabilities_from(
    ds: &LabeledDataset,
    rate: f64,
    rng: &mut RandomStream,
) -> Result<Vec<f64>> {
    let n = ds.len();
    let w: Vec<f64> = (0..ds.dim()).map(|_| rng.normal()).collect();
    let b = 0.5 * rng.normal();

    let proj: Vec<f64> = (0..n).map(|i| dot(&w, ds.x(i))).collect();
    let mean = proj.iter().sum::<f64>() / n as f64;
    let sd = (proj.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let scale = if sd > 0.0 { 1.0 / sd } else { 0.0 };
    let g: Vec<f64> = proj
        .iter()
        .map(|p| logistic((p - mean) * scale + b))
        .collect();
    let g_mean = g.iter().sum::<f64>() / n as f64;
    let rel: Vec<f64> = g.iter().map(|v| v / g_mean).collect();

    let clipped_mean = |lambda: f64| {
        rel.iter()
            .map(|r| (lambda * r).min(MAX_FLIP_PROBABILITY))
            .sum::<f64>()
            / n as f64
    };
    let mut lambda = rate;
    if clipped_mean(lambda) < rate {
        let (mut lo, mut hi) = (rate, rate);
        while clipped_mean(hi) < rate && hi < 1e9 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if clipped_mean(mid) < rate {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lambda = hi;
    }
    Ok(rel
        .iter()
        .map(|r| (lambda * r).clamp(0.0, MAX_FLIP_PROBABILITY))
        .collect())
}

/// Instance-dependent label noise. Whether a sample flips depends on its
/// features through [`idn_flip_probabilities`]; a flipped sample takes the
/// class with the largest score under a fixed random projection `W·x`,
/// excluding its true class, so the wrong label also depends on the instance.
pub fn inject_idn_noise(ds: &LabeledDataset, rate: f64, seed: u64) -> Result<LabeledDataset> {
    check_noise_rate(rate)?;
    require_noise_free(ds)?;
    let mut rng = derive_stream(seed, stream_id(purpose::IDN_NOISE, 0, 0));
    let q = idn_probabilities_from(ds, rate, &mut rng)?;

    let c = ds.class_count();
    let projection: Vec<Vec<f64>> = (0..c)
        .map(|_| (0..ds.dim()).map(|_| rng.normal()).collect())
        .collect();

    let noisy = (0..ds.len())
        .map(|i| {
            let truth = ds.clean_labels()[i];
            if rng.uniform() >= q[i] {
                return truth;
            }
            let x = ds.x(i);
            (0..c)
                .filter(|&k| k != truth)
                .map(|k| (k, dot(&projection[k], x)))
                .fold((truth, f64::NEG_INFINITY), |best, cand| {
                    if cand.1 > best.1 {
                        cand
                    } else {
                        best
                    }
                })
                .0
        })
        .collect();
    ds.with_noisy_labels(noisy)
}

/// Instance-independent noise: exactly `round(rate · n)` uniformly chosen
/// samples receive a uniformly random wrong label.
pub fn inject_symmetric_noise(
    ds: &LabeledDataset,
    rate: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    check_noise_rate(rate)?;
    require_noise_free(ds)?;
    let mut rng = derive_stream(seed, stream_id(purpose::SYMMETRIC_NOISE, 0, 0));
    let n = ds.len();
    let flips = ((rate * n as f64).round() as usize).min(n);

    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let c = ds.class_count();
    let mut noisy = ds.clean_labels().to_vec();
    for &i in &order[..flips] {
        noisy[i] = (noisy[i] + 1 + rng.below(c - 1)) % c;
    }
    ds.with_noisy_labels(noisy)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified (by clean label) train/test split. The test set has
/// `round(test_fraction · n)` samples, allotted to classes by largest
/// remainder so every class is within one sample of its exact share.
pub fn split(ds: &LabeledDataset, test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test_fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    let mut rng = derive_stream(seed, stream_id(purpose::SPLIT, 0, 0));
    let c = ds.class_count();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &y) in ds.clean_labels().iter().enumerate() {
        by_class[y].push(i);
    }

    let total = (test_fraction * ds.len() as f64).round() as usize;
    let exact: Vec<f64> = by_class
        .iter()
        .map(|m| test_fraction * m.len() as f64)
        .collect();
    let mut quota: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut missing = total.saturating_sub(quota.iter().sum());
    for &k in order.iter().cycle().take(c * 2) {
        if missing == 0 {
            break;
        }
        if quota[k] < by_class[k].len() {
            quota[k] += 1;
            missing -= 1;
        }
    }

    let mut train = Vec::with_capacity(ds.len() - total);
    let mut test = Vec::with_capacity(total);
    for (members, &q) in by_class.iter_mut().zip(&quota) {
        rng.shuffle(members);
        test.extend_from_slice(&members[..q]);
        train.extend_from_slice(&members[q..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitIndices { train, test })
}

fn header(d: usize) -> String {
    let mut h = String::from("id");
    for j in 0..d {
        write!(h, ",f{j}").unwrap();
    }
    h.push_str(",clean_label,noisy_label");
    h
}

pub fn write_dataset<W: Write>(ds: &LabeledDataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{}", header(ds.dim()))?;
    let mut line = String::new();
    for i in 0..ds.len() {
        line.clear();
        write!(line, "{i}").unwrap();
        for v in ds.x(i) {
            write!(line, ",{v:?}").unwrap();
        }
        writeln!(
            line,
            ",{},{}",
            ds.clean_labels()[i],
            ds.noisy_labels()[i]
        )
        .unwrap();
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn write_dataset_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(ds, std::io::BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Parses the dataset CSV format. Labels must be `< class_count`; when
/// `class_count` is `None` it is inferred as `max label + 1` (at least 2).
pub fn read_dataset<R: BufRead>(input: R, class_count: Option<usize>) -> Result<LabeledDataset> {
    let mut lines = input.lines();
    let head = match lines.next() {
        Some(l) => l.map_err(|e| Error::parse(1, e.to_string()))?,
        None => return Err(Error::parse(1, "missing header")),
    };
    let names: Vec<&str> = head.split(',').collect();
    if names.len() < 5 {
        return Err(Error::parse(1, "header needs id, >= 2 features and two labels"));
    }
    let d = names.len() - 3;
    if head != header(d) {
        return Err(Error::parse(
            1,
            format!("malformed header, expected `{}`", header(d)),
        ));
    }

    let mut data = Vec::new();
    let mut clean = Vec::new();
    let mut noisy = Vec::new();
    let mut label_lines = Vec::new();
    for (k, line) in lines.enumerate() {
        let lineno = k + 2;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 3 {
            return Err(Error::parse(
                lineno,
                format!("expected d+3 columns ({}), found {}", d + 3, fields.len()),
            ));
        }
        let id: usize = fields[0]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid id `{}`", fields[0])))?;
        if id != clean.len() {
            return Err(Error::parse(
                lineno,
                format!("expected id {}, found {id}", clean.len()),
            ));
        }
        for f in &fields[1..=d] {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(lineno, format!("non-numeric feature `{f}`")))?;
            if !v.is_finite() {
                return Err(Error::parse(lineno, format!("non-finite feature `{f}`")));
            }
            data.push(v);
        }
        let label = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::parse(lineno, format!("invalid label `{s}`")))
        };
        clean.push(label(fields[d + 1])?);
        noisy.push(label(fields[d + 2])?);
        label_lines.push(lineno);
    }
    if clean.is_empty() {
        return Err(Error::parse(2, "no data rows"));
    }

    let c = class_count.unwrap_or_else(|| {
        clean.iter().chain(&noisy).copied().max().unwrap_or(0).max(1) + 1
    });
    for (i, &lineno) in label_lines.iter().enumerate() {
        if clean[i] >= c || noisy[i] >= c {
            return Err(Error::parse(lineno, "label out of range"));
        }
    }
    let n = clean.len();
    LabeledDataset::new(Matrix::new(n, d, data)?, clean, noisy, c)
}

pub fn read_dataset_csv(path: impl AsRef<Path>, class_count: Option<usize>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file), class_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LabeledDataset {
        generate_gaussian_mixture(200, 3, 4, 3.0, 5).unwrap()
    }

    #[test]
    fn generation_is_balanced() {
        let ds = generate_gaussian_mixture(101, 2, 2, 6.0, 1).unwrap();
        let ones = ds.clean_labels().iter().filter(|&&y| y == 1).count();
        assert!(ones == 50 || ones == 51);
        assert!(ds.is_noise_free());
        assert_eq!(ds.dim(), 2);
    }

    #[test]
    fn generation_rejects_bad_sizes() {
        assert!(generate_gaussian_mixture(1, 2, 2, 1.0, 0).is_err());
        assert!(generate_gaussian_mixture(10, 1, 2, 1.0, 0).is_err());
        assert!(generate_gaussian_mixture(10, 2, 1, 1.0, 0).is_err());
        assert!(generate_gaussian_mixture(10, 2, 2, 0.0, 0).is_err());
    }

    #[test]
    fn noise_rate_bounds() {
        let ds = small();
        for bad in [0.0, -0.1, 0.96, 1.5, f64::NAN] {
            assert!(matches!(inject_idn_noise(&ds, bad, 1), Err(Error::NoiseRate(_))));
            assert!(matches!(
                inject_symmetric_noise(&ds, bad, 1),
                Err(Error::NoiseRate(_))
            ));
        }
    }

    #[test]
    fn noise_requires_clean_input() {
        let noisy = inject_symmetric_noise(&small(), 0.2, 1).unwrap();
        assert!(inject_idn_noise(&noisy, 0.2, 1).is_err());
    }

    #[test]
    fn symmetric_noise_exact_count_and_determinism() {
        let ds = generate_gaussian_mixture(1000, 2, 3, 2.0, 4).unwrap();
        let a = inject_symmetric_noise(&ds, 0.5, 9).unwrap();
        assert_eq!(a.noise_mask().iter().filter(|&&m| m).count(), 500);
        let b = inject_symmetric_noise(&ds, 0.2, 9).unwrap();
        let c = inject_symmetric_noise(&ds, 0.2, 9).unwrap();
        assert_eq!(b.noisy_labels(), c.noisy_labels());
    }

    #[test]
    fn mask_matches_label_disagreement() {
        let ds = inject_idn_noise(&small(), 0.3, 2).unwrap();
        for i in 0..ds.len() {
            assert_eq!(ds.noise_mask()[i], ds.noisy_labels()[i] != ds.clean_labels()[i]);
        }
    }

    #[test]
    fn split_sizes_and_stratification() {
        let ds = generate_gaussian_mixture(100, 2, 4, 2.0, 3).unwrap();
        let s = split(&ds, 0.2, 11).unwrap();
        assert_eq!(s.test.len(), 20);
        assert_eq!(s.train.len(), 80);
        for k in 0..4 {
            let total = ds.clean_labels().iter().filter(|&&y| y == k).count() as f64;
            let in_test = s.test.iter().filter(|&&i| ds.clean_labels()[i] == k).count() as f64;
            assert!((in_test - 0.2 * total).abs() <= 1.0);
        }
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(s, split(&ds, 0.2, 11).unwrap());
        assert!(split(&ds, 0.0, 1).is_err());
        assert!(split(&ds, 1.0, 1).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let ds = inject_idn_noise(&small(), 0.3, 8).unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), Some(4)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_errors_name_the_line() {
        let text = "id,f0,f1,clean_label,noisy_label\n0,1.0,2.0,0,1\n1,0.5,0.5,2,0\n";
        let err = read_dataset(text.as_bytes(), Some(2)).unwrap_err();
        assert_eq!(err.to_string(), "label out of range at line 3");

        let text = "id,f0,f1,clean_label,noisy_label\n0,1.0,0,1\n";
        let err = read_dataset(text.as_bytes(), Some(2)).unwrap_err();
        assert!(err.to_string().contains("expected d+3 columns"), "{err}");
        assert!(err.to_string().contains("line 2"));

        let text = "id,f0,f1,clean_label,noisy_label\n0,abc,0.0,0,1\n";
        let err = read_dataset(text.as_bytes(), Some(2)).unwrap_err();
        assert!(err.to_string().contains("non-numeric feature"), "{err}");

        let text = "id,x0,f1,clean_label,noisy_label\n0,1.0,0.0,0,1\n";
        let err = read_dataset(text.as_bytes(), Some(2)).unwrap_err();
        assert!(err.to_string().contains("line 1"));
    }

    #[test]
    fn csv_infers_class_count() {
        let text = "id,f0,f1,clean_label,noisy_label\n0,1.0,2.0,0,2\n";
        let ds = read_dataset(text.as_bytes(), None).unwrap();
        assert_eq!(ds.class_count(), 3);
        assert!(ds.noise_mask()[0]);
    }
}

//! Independent oracles for pass-core. Every reference value here is computed
//! by code written separately from the production paths: exact rational Otsu
//! scans, finite-difference gradients over a standalone forward pass,
//! direct likelihood and inertia evaluation, and hand-formula statistics.

use std::time::Instant;

use pass_core::classifier::{init_mlp, loss_and_gradient, MlpParams};
use pass_core::numerics::{cosine, derive_stream};
use pass_core::partition::{fit_gmm2, kmeans2_fit, otsu_fit, Gmm2, Histogram};
use pass_core::stats::{chi_square_sf, friedman, nemenyi_cd, Alpha, RankTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: &'static str,
    pub cases: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    /// Cases that failed a structural check (ordering, plateau, monotonicity).
    pub mismatches: usize,
    pub seconds: f64,
    pub passed: bool,
}

impl OracleReport {
    fn finish(
        name: &'static str,
        cases: usize,
        max_deviation: f64,
        tolerance: f64,
        mismatches: usize,
        start: Instant,
    ) -> Self {
        Self {
            name,
            cases,
            max_deviation,
            tolerance,
            mismatches,
            seconds: start.elapsed().as_secs_f64(),
            passed: mismatches == 0 && max_deviation <= tolerance,
        }
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<8} {:<22} cases={:<6} max_dev={:.3e} tol={:.0e} mismatches={} {:.2}s",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.max_deviation,
            self.tolerance,
            self.mismatches,
            self.seconds
        )
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss(r: &mut ChaCha8Rng) -> f64 {
    // Box-Muller.
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

// ---------------------------------------------------------------------------
// Agreement

/// Uniform point on the probability simplex of dimension `c`.
pub fn random_simplex(r: &mut ChaCha8Rng, c: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..c).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cosine through unit vectors: `Σ (u_i/|u|)(v_i/|v|)`.
pub fn cosine_oracle(u: &[f64], v: &[f64]) -> f64 {
    let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    u.iter().zip(v).map(|(a, b)| (a / nu) * (b / nv)).sum()
}

/// Symmetry, positive-scale invariance and agreement with the unit-vector
/// formula on random simplex pairs.
pub fn agreement_oracle(pairs: usize, seed: u64) -> OracleReport {
    let start = Instant::now();
    let mut r = rng(seed);
    let mut dev = 0.0f64;
    let mut mismatches = 0;
    for _ in 0..pairs {
        let c = r.random_range(2..=10);
        let u = random_simplex(&mut r, c);
        let v = random_simplex(&mut r, c);
        let a = cosine(&u, &v).unwrap();
        let b = cosine(&v, &u).unwrap();
        let scale = r.random_range(0.01..100.0);
        let us: Vec<f64> = u.iter().map(|x| x * scale).collect();
        let scaled = cosine(&us, &v).unwrap();
        if a != b || !(0.0..=1.0 + 1e-12).contains(&a) {
            mismatches += 1;
        }
        dev = dev.max((a - scaled).abs()).max((a - cosine_oracle(&u, &v)).abs());
    }
    OracleReport::finish("agreement", pairs, dev, 1e-12, mismatches, start)
}

// ---------------------------------------------------------------------------
// Otsu

/// Exact Otsu scan. With bin centres `(2b+1)/(2B)` and per-side totals
/// `T = Σ c_b (2b+1)`, `σ_B²(j) = (T1 n2 − T2 n1)² / (n1 n2 · 4B²N²)`, so the
/// numerator-over-`n1 n2` ratio ranks edges exactly in integer arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactOtsu {
    /// Maximal `σ_B²` as a float.
    pub max_variance: f64,
    /// First arg-max edge and the end of the run of exactly tied edges after it.
    pub plateau: (usize, usize),
    pub threshold: f64,
}

fn bin_index(s: f64, bins: usize) -> usize {
    ((s * bins as f64).floor() as usize).min(bins - 1)
}

pub fn exact_otsu(scores: &[f64], bins: usize) -> Option<ExactOtsu> {
    let mut counts = vec![0i128; bins];
    for &s in scores {
        counts[bin_index(s, bins)] += 1;
    }
    let n: i128 = counts.iter().sum();
    let t_total: i128 = (0..bins).map(|b| counts[b] * (2 * b as i128 + 1)).sum();
    // (numerator, denominator) of the ranking ratio for each edge 1..bins-1.
    let ratio = |j: usize| -> (i128, i128) {
        let n1: i128 = counts[..j].iter().sum();
        let t1: i128 = (0..j).map(|b| counts[b] * (2 * b as i128 + 1)).sum();
        let (n2, t2) = (n - n1, t_total - t1);
        if n1 == 0 || n2 == 0 {
            return (0, 1);
        }
        let d = t1 * n2 - t2 * n1;
        (d * d, n1 * n2)
    };
    let values: Vec<(i128, i128)> = (1..bins).map(ratio).collect();
    let greater = |a: (i128, i128), b: (i128, i128)| a.0 * b.1 > b.0 * a.1;
    let equal = |a: (i128, i128), b: (i128, i128)| a.0 * b.1 == b.0 * a.1;
    let mut best = 0;
    for k in 1..values.len() {
        if greater(values[k], values[best]) {
            best = k;
        }
    }
    if values[best].0 == 0 {
        return None;
    }
    let mut last = best;
    while last + 1 < values.len() && equal(values[last + 1], values[best]) {
        last += 1;
    }
    let (num, den) = values[best];
    let bf = bins as f64;
    let nf = n as f64;
    let max_variance = num as f64 / den as f64 / (4.0 * bf * bf * nf * nf);
    let plateau = (best + 1, last + 1);
    Some(ExactOtsu {
        max_variance,
        plateau,
        threshold: (plateau.0 as f64 / bf + plateau.1 as f64 / bf) / 2.0,
    })
}

/// Mixed unimodal and bimodal score vectors in `[0, 1]`, lengths 10..=5000.
pub fn random_scores(r: &mut ChaCha8Rng) -> Vec<f64> {
    let n = r.random_range(10..=5000);
    let clamp = |v: f64| v.clamp(0.0, 1.0);
    match r.random_range(0..4) {
        0 => (0..n).map(|_| r.random::<f64>()).collect(),
        1 => {
            let (m, s) = (r.random_range(0.2..0.9), r.random_range(0.01..0.2));
            (0..n).map(|_| clamp(m + s * gauss(r))).collect()
        }
        2 => {
            let w = r.random_range(0.2..0.8);
            let (m1, m2) = (r.random_range(0.0..0.5), r.random_range(0.5..1.0));
            let s = r.random_range(0.01..0.15);
            (0..n)
                .map(|_| {
                    let m = if r.random::<f64>() < w { m1 } else { m2 };
                    clamp(m + s * gauss(r))
                })
                .collect()
        }
        _ => {
            // Agreement-like: mass near 1 with a tail.
            (0..n)
                .map(|_| clamp(1.0 - r.random::<f64>().powi(r.random_range(2..6))))
                .collect()
        }
    }
}

/// `otsu_fit` against the exact scan: maximal variance (floating-point
/// tolerance), plateau edges and threshold (exact).
pub fn otsu_oracle(vectors: usize, seed: u64) -> OracleReport {
    let start = Instant::now();
    let mut r = rng(seed);
    let bins = 256;
    let mut dev = 0.0f64;
    let mut mismatches = 0;
    let mut cases = 0;
    while cases < vectors {
        let scores = random_scores(&mut r);
        let Some(exact) = exact_otsu(&scores, bins) else {
            continue;
        };
        cases += 1;
        let hist = Histogram::new(&scores, bins).unwrap();
        let fit = otsu_fit(&hist).unwrap();
        dev = dev.max((fit.max_variance - exact.max_variance).abs() / exact.max_variance);
        if fit.plateau != exact.plateau || fit.threshold != exact.threshold {
            mismatches += 1;
        }
    }
    OracleReport::finish("otsu_exhaustive_scan", cases, dev, 1e-12, mismatches, start)
}

// ---------------------------------------------------------------------------
// Gradients

/// Stand-alone forward pass and cross-entropy for an MLP with ReLU hidden
/// layers; parameters given as per-layer `(out × in weights, bias)`.
pub fn reference_loss(layers: &[(Vec<Vec<f64>>, Vec<f64>)], x: &[f64], label: usize) -> f64 {
    let mut h = x.to_vec();
    for (li, (w, b)) in layers.iter().enumerate() {
        let mut z: Vec<f64> = w
            .iter()
            .zip(b)
            .map(|(row, bias)| row.iter().zip(&h).map(|(a, c)| a * c).sum::<f64>() + bias)
            .collect();
        if li + 1 < layers.len() {
            z.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        h = z;
    }
    let m = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + h.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - h[label]
}

fn unpack(params: &MlpParams) -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    params
        .layers()
        .iter()
        .map(|l| {
            let w = l.weights().chunks(l.inputs()).map(<[f64]>::to_vec).collect();
            (w, l.bias().to_vec())
        })
        .collect()
}

/// Some hidden pre-activation lies within `margin` of zero.
pub fn near_kink(layers: &[(Vec<Vec<f64>>, Vec<f64>)], x: &[f64], margin: f64) -> bool {
    let mut h = x.to_vec();
    for (w, b) in &layers[..layers.len() - 1] {
        let z: Vec<f64> = w
            .iter()
            .zip(b)
            .map(|(row, bias)| row.iter().zip(&h).map(|(a, c)| a * c).sum::<f64>() + bias)
            .collect();
        if z.iter().any(|v| v.abs() < margin) {
            return true;
        }
        h = z.into_iter().map(|v| v.max(0.0)).collect();
    }
    false
}

/// Central differences of [`reference_loss`], flattened layer by layer as
/// weights (row-major) then bias.
pub fn finite_difference_gradient(params: &MlpParams, x: &[f64], label: usize, h: f64) -> Vec<f64> {
    let mut layers = unpack(params);
    let mut grad = Vec::new();
    for li in 0..layers.len() {
        let (rows, cols) = (layers[li].0.len(), layers[li].0[0].len());
        for i in 0..rows {
            for j in 0..cols {
                let orig = layers[li].0[i][j];
                layers[li].0[i][j] = orig + h;
                let up = reference_loss(&layers, x, label);
                layers[li].0[i][j] = orig - h;
                let down = reference_loss(&layers, x, label);
                layers[li].0[i][j] = orig;
                grad.push((up - down) / (2.0 * h));
            }
        }
        for i in 0..rows {
            let orig = layers[li].1[i];
            layers[li].1[i] = orig + h;
            let up = reference_loss(&layers, x, label);
            layers[li].1[i] = orig - h;
            let down = reference_loss(&layers, x, label);
            layers[li].1[i] = orig;
            grad.push((up - down) / (2.0 * h));
        }
    }
    grad
}

/// `|a − b| / max(|a|, |b|, floor)`, maximised over entries.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub const GRADIENT_STEP: f64 = 1e-5;
/// Networks with a hidden pre-activation this close to the ReLU kink are
/// resampled: central differences straddling the kink are not derivatives.
pub const KINK_MARGIN: f64 = 1e-3;
pub const GRADIENT_FLOOR: f64 = 1e-4;

pub fn gradient_oracle(nets: usize, seed: u64) -> OracleReport {
    let start = Instant::now();
    let mut r = rng(seed);
    let mut dev = 0.0f64;
    let mut mismatches = 0;
    let mut case = 0u64;
    let mut done = 0;
    while done < nets {
        case += 1;
        let d = r.random_range(2..=6);
        let depth = r.random_range(1..=2);
        let hidden: Vec<usize> = (0..depth).map(|_| r.random_range(2..=8)).collect();
        let c = r.random_range(2..=5);
        let mut params = init_mlp(d, &hidden, c, &mut derive_stream(seed, case));
        for layer in params.layers_mut() {
            layer.bias_mut().iter_mut().for_each(|b| *b = 0.5 * gauss(&mut r));
        }
        let x: Vec<f64> = (0..d).map(|_| gauss(&mut r)).collect();
        let label = r.random_range(0..c);
        if near_kink(&unpack(&params), &x, KINK_MARGIN) {
            continue;
        }
        let (loss, grad) = loss_and_gradient(&params, &x, label).unwrap();
        if (loss - reference_loss(&unpack(&params), &x, label)).abs() > 1e-10 {
            mismatches += 1;
        }
        let fd = finite_difference_gradient(&params, &x, label, GRADIENT_STEP);
        dev = dev.max(relative_error(&grad.to_flat(), &fd, GRADIENT_FLOOR));
        done += 1;
    }
    OracleReport::finish("gradient_finite_diff", nets, dev, 1e-4, mismatches, start)
}

// ---------------------------------------------------------------------------
// EM / K-Means

pub fn gmm_log_likelihood(m: &Gmm2, values: &[f64]) -> f64 {
    values
        .iter()
        .map(|&x| {
            (0..2)
                .map(|k| {
                    let v = m.variances[k];
                    m.weights[k] * (-(x - m.means[k]).powi(2) / (2.0 * v)).exp()
                        / (2.0 * std::f64::consts::PI * v).sqrt()
                })
                .sum::<f64>()
                .ln()
        })
        .sum()
}

pub const EM_SLACK: f64 = 1e-10;

fn random_1d(r: &mut ChaCha8Rng) -> Vec<f64> {
    let n = r.random_range(20..=2000);
    let w = r.random_range(0.1..0.9);
    let (m1, m2) = (r.random_range(-2.0..1.0), r.random_range(0.0..3.0));
    let (s1, s2) = (r.random_range(0.05..1.0), r.random_range(0.05..1.0));
    (0..n)
        .map(|_| {
            if r.random::<f64>() < w {
                m1 + s1 * gauss(r)
            } else {
                m2 + s2 * gauss(r)
            }
        })
        .collect()
}

/// Non-decreasing log-likelihood traces (slack relative to |LL|) and the last
/// trace entry against a direct evaluation.
pub fn em_oracle(fits: usize, seed: u64) -> OracleReport {
    let start = Instant::now();
    let mut r = rng(seed);
    let mut mismatches = 0;
    let mut dev = 0.0f64;
    for _ in 0..fits {
        let values = random_1d(&mut r);
        let m = fit_gmm2(&values).unwrap();
        let t = &m.log_likelihood_trace;
        for w in t.windows(2) {
            if w[1] < w[0] - EM_SLACK * w[0].abs().max(1.0) {
                mismatches += 1;
            }
        }
        let direct = gmm_log_likelihood(&m, &values);
        let last = *t.last().unwrap();
        if direct < last - EM_SLACK * last.abs().max(1.0) {
            mismatches += 1;
        }
        if t.len() < pass_core::partition::GMM_MAX_ITERATIONS {
            dev = dev.max((direct - last).abs() / last.abs().max(1.0));
        }
    }
    OracleReport::finish("em_monotone", fits, dev, 1e-9, mismatches, start)
}

/// Non-increasing inertia traces and the final inertia against a direct sum.
pub fn kmeans_oracle(fits: usize, seed: u64) -> OracleReport {
    let start = Instant::now();
    let mut r = rng(seed);
    let mut mismatches = 0;
    let mut dev = 0.0f64;
    for _ in 0..fits {
        let values = random_1d(&mut r);
        let fit = kmeans2_fit(&values).unwrap();
        let t = &fit.inertia_trace;
        for w in t.windows(2) {
            if w[1] > w[0] + EM_SLACK * w[0].max(1.0) {
                mismatches += 1;
            }
        }
        let direct: f64 = values
            .iter()
            .map(|&v| {
                let a = (v - fit.centroids[0]).powi(2);
                let b = (v - fit.centroids[1]).powi(2);
                a.min(b)
            })
            .sum();
        dev = dev.max((direct - t.last().unwrap()).abs() / direct.max(1.0));
    }
    OracleReport::finish("kmeans_monotone", fits, dev, 1e-9, mismatches, start)
}

// ---------------------------------------------------------------------------
// Statistics

/// Hand formula from rank sums.
pub fn friedman_by_hand(rank_sums: &[f64], n: usize) -> f64 {
    let k = rank_sums.len() as f64;
    let n = n as f64;
    12.0 / (n * k * (k + 1.0)) * rank_sums.iter().map(|r| r * r).sum::<f64>() - 3.0 * n * (k + 1.0)
}

/// Upper regularised incomplete gamma `Q(a, x)` by series / continued fraction.
pub fn upper_gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_gamma_a = ln_gamma(a);
    if x < a + 1.0 {
        let (mut sum, mut term, mut ap) = (1.0 / a, 1.0 / a, a);
        for _ in 0..10_000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        1.0 - sum * (-x + a * x.ln() - ln_gamma_a).exp()
    } else {
        // Lentz's method.
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x + a * x.ln() - ln_gamma_a).exp() * h
    }
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(z: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * z).sin()).ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = G[0];
    for (i, g) in G.iter().enumerate().skip(1) {
        x += g / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

fn table_with_rank_sums(rows: &[[f64; 3]]) -> RankTable {
    RankTable {
        methods: vec!["a".into(), "b".into(), "c".into()],
        datasets: (0..rows.len()).map(|i| format!("d{i}")).collect(),
        ranks: rows.iter().map(|r| r.to_vec()).collect(),
    }
}

/// Rank table for the 10-dataset case: eight rows (1,2,3), one (1,3,2), one
/// (2,1,3); column sums (11, 20, 29).
pub fn ten_dataset_ranks() -> Vec<[f64; 3]> {
    let mut rows = vec![[1.0, 2.0, 3.0]; 8];
    rows.push([1.0, 3.0, 2.0]);
    rows.push([2.0, 1.0, 3.0]);
    rows
}

/// Four-dataset case with column sums (4, 9, 11).
pub fn four_dataset_ranks() -> Vec<[f64; 3]> {
    vec![[1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [1.0, 2.0, 3.0], [1.0, 3.0, 2.0]]
}

/// Friedman statistic and p-value against the hand formula and `exp(−x/2)`,
/// random rank tables included; `chi_square_sf` against an independent
/// incomplete-gamma evaluation; Nemenyi CD against `q·sqrt(k(k+1)/(6N))`.
pub fn friedman_oracle(random_tables: usize, seed: u64) -> OracleReport {
    let start = Instant::now();
    let mut r = rng(seed);
    let mut dev = 0.0f64;
    let mut mismatches = 0;
    let mut cases = 0;
    let check = |tbl: &RankTable, dev: &mut f64| {
        let res = friedman(tbl).unwrap();
        let sums = tbl.rank_sums();
        let hand = friedman_by_hand(&sums, tbl.dataset_count()).max(0.0);
        *dev = dev.max((res.statistic - hand).abs());
        *dev = dev.max((res.p_value - (-hand / 2.0).exp()).abs());
    };
    for rows in [ten_dataset_ranks(), four_dataset_ranks()] {
        check(&table_with_rank_sums(&rows), &mut dev);
        cases += 1;
    }
    for _ in 0..random_tables {
        let n = r.random_range(2..=30);
        let rows: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let mut p = [1.0, 2.0, 3.0];
                for i in (1..3).rev() {
                    p.swap(i, r.random_range(0..=i));
                }
                p
            })
            .collect();
        check(&table_with_rank_sums(&rows), &mut dev);
        cases += 1;
    }
    for _ in 0..random_tables {
        let df = r.random_range(1..=12);
        let x = r.random_range(0.0..40.0);
        dev = dev.max((chi_square_sf(x, df) - upper_gamma_q(df as f64 / 2.0, x / 2.0)).abs());
        cases += 1;
    }
    let q05 = [1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164];
    for k in 2..=10usize {
        for n in [2usize, 4, 10, 25] {
            let hand = q05[k - 2] * ((k * (k + 1)) as f64 / (6.0 * n as f64)).sqrt();
            match nemenyi_cd(k, n, Alpha::P05) {
                Ok(cd) => dev = dev.max((cd - hand).abs()),
                Err(_) => mismatches += 1,
            }
            cases += 1;
        }
    }
    OracleReport::finish("friedman_nemenyi", cases, dev, 1e-10, mismatches, start)
}

/// Every oracle at full size.
pub fn run_oracles(seed: u64) -> Vec<OracleReport> {
    vec![
        agreement_oracle(100_000, seed),
        otsu_oracle(1000, seed + 1),
        gradient_oracle(100, seed + 2),
        em_oracle(100, seed + 3),
        kmeans_oracle(100, seed + 4),
        friedman_oracle(200, seed + 5),
    ]
}

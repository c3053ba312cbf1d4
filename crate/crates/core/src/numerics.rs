//! Dense numeric substrate: row-major matrices, softmax, cosine similarity and
//! seeded random streams.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Row-major dense matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "matrix data has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite matrix entry at row {}, col {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
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
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }
}

#[inline]
pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() || logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFiniteLogits);
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// In-place softmax for internal callers that already guarantee finite input.
pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in z.iter_mut() {
        *v /= total;
    }
}

/// Cosine similarity `u·v / (‖u‖‖v‖)`.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "cosine of vectors with lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    if u.len() < 2 {
        return Err(Error::InvalidArgument(
            "cosine needs vectors of length >= 2".into(),
        ));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if !(nu > 0.0 && nv > 0.0) || !nu.is_finite() || !nv.is_finite() {
        return Err(Error::DegenerateVector);
    }
    Ok(dot(u, v) / (nu * nv))
}

/// Well-known stream purposes. Combined with an epoch and a member index into
/// a 64-bit stream id by [`stream_id`].
pub mod purpose {
    pub const DATA: u16 = 1;
    pub const IDN_NOISE: u16 = 2;
    pub const SYMMETRIC_NOISE: u16 = 3;
    pub const SPLIT: u16 = 4;
    pub const INIT: u16 = 5;
    pub const TRAIN: u16 = 6;
}

/// Packs `(purpose, epoch, member)` into a stream id: 16 | 32 | 16 bits.
pub fn stream_id(purpose: u16, epoch: u32, member: u16) -> u64 {
    (u64::from(purpose) << 48) | (u64::from(epoch) << 16) | u64::from(member)
}

/// A reproducible random stream. Each `(master_seed, stream_id)` pair selects
/// an independent ChaCha8 keystream, so draws never depend on how much any
/// other stream has been consumed.
///
/// Single consumer: concurrent users derive their own streams.
#[derive(Debug, Clone)]
pub struct RandomStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

pub fn derive_stream(master_seed: u64, stream_id: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    RandomStream {
        master_seed,
        stream_id,
        rng,
    }
}

impl RandomStream {
    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::RngCore;

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in &p {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }

        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
        assert!(p[1] >= 0.0 && p[1] < 1e-300);

        // e / (e + e^2) and e^2 / (e + e^2)
        let p = softmax(&[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(p[0], 0.26894, epsilon = 1e-5);
        assert_abs_diff_eq!(p[1], 0.73106, epsilon = 1e-5);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(matches!(
            softmax(&[1.0, f64::NAN]),
            Err(Error::NonFiniteLogits)
        ));
        assert!(matches!(
            softmax(&[f64::INFINITY, 0.0]),
            Err(Error::NonFiniteLogits)
        ));
    }

    #[test]
    fn cosine_examples() {
        assert_abs_diff_eq!(cosine(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 1.0, epsilon = 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(
            cosine(&[0.6, 0.4], &[0.4, 0.6]).unwrap(),
            0.48 / 0.52,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cosine_rejects_zero_norm() {
        assert!(matches!(
            cosine(&[0.0, 0.0], &[0.5, 0.5]),
            Err(Error::DegenerateVector)
        ));
        assert!(matches!(cosine(&[1.0], &[1.0]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = derive_stream(42, 0);
        let mut b = derive_stream(42, 0);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(
            derive_stream(42, 0).next_u64(),
            derive_stream(42, 1).next_u64()
        );
        let mut s = derive_stream(7, 3);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn sibling_streams_share_no_prefix_outputs() {
        let firsts: Vec<Vec<u64>> = (0..8)
            .map(|id| {
                let mut s = derive_stream(9, stream_id(purpose::TRAIN, id, 0));
                (0..16).map(|_| s.next_u64()).collect()
            })
            .collect();
        for i in 0..firsts.len() {
            for j in i + 1..firsts.len() {
                assert!(firsts[i].iter().all(|v| !firsts[j].contains(v)));
            }
        }
    }

    #[test]
    fn stream_is_independent_of_other_consumption() {
        let mut other = derive_stream(3, 1);
        for _ in 0..1000 {
            other.next_u64();
        }
        let mut fresh = derive_stream(3, 2);
        let mut late = derive_stream(3, 2);
        assert_eq!(fresh.next_u64(), late.next_u64());
    }

    #[test]
    fn matrix_validates_shape_and_finiteness() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m.row(1), &[3.0, 4.0]);
        assert_eq!(m.get(0, 1), 2.0);
    }

    fn simplex(c: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.001f64..1.0, c).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect()
        })
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(z in prop::collection::vec(-50.0f64..50.0, 2..20)) {
            let p = softmax(&z).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x > 0.0));
        }

        #[test]
        fn cosine_symmetric_and_scale_invariant(
            (u, v) in (2usize..10).prop_flat_map(|c| (simplex(c), simplex(c))),
            alpha in 0.01f64..100.0,
        ) {
            let uv = cosine(&u, &v).unwrap();
            prop_assert_eq!(uv, cosine(&v, &u).unwrap());
            let scaled: Vec<f64> = u.iter().map(|x| alpha * x).collect();
            prop_assert!((cosine(&scaled, &v).unwrap() - uv).abs() < 1e-12);
            prop_assert!((-1e-12..=1.0 + 1e-12).contains(&uv));
        }
    }
}

//! Peer-agreement sample selection (PASS) for learning with noisy labels.
//!
//! Three small MLP classifiers are trained side by side. Every epoch each
//! classifier's training subset is chosen by its two peers: samples on which
//! the peers' predictive distributions agree (high cosine similarity) are kept
//! as clean, the rest are discarded. The split point is found with Otsu's
//! global threshold, with K-Means and a two-component GMM as alternates.
//!
//! The crate also ships the baselines (train-on-all, small-loss selection),
//! selection-quality metrics and the Friedman/Nemenyi comparison used to rank
//! methods across datasets.
//!
//! With the default `parallel` feature, row-wise prediction, the three
//! per-epoch selections and the three training steps run on rayon. Results are
//! bit-identical to the sequential build because every random stream is keyed
//! by `(master_seed, purpose, epoch, member)`.

pub mod agreement;
pub mod classifier;
pub mod data;
mod error;
pub mod metrics;
pub mod numerics;
pub mod parallel;
pub mod partition;
pub mod selectors;
pub mod stats;

pub use error::{Error, Result};

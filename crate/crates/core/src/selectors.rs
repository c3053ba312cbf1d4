//! PASS training: three classifiers that take turns as peers and as the model
//! being trained, plus the train-on-all and small-loss baselines.
//!
//! Epoch schedule:
//! 1. warmup: every classifier trains on all training samples;
//! 2. afterwards, per epoch: predictions of all three classifiers are taken
//!    once over the training set, classifier `k` gets the partition computed
//!    from the agreement of the other two, then each classifier trains one
//!    epoch on its clean subset. The noisy subset is not used.
//!
//! Selections are made from the snapshot taken at the start of the epoch, so
//! the three (select, train) steps are independent and can run concurrently
//! without changing results.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::agreement::{agreement_scores, ProbMatrix};
use crate::classifier::{
    cross_entropy, init_mlp, predict_all, Classifier, MlpParams, TrainConfig,
};
use crate::data::{LabeledDataset, SplitIndices};
use crate::metrics::{selection_quality, test_accuracy, SelectionQuality};
use crate::numerics::{derive_stream, purpose, stream_id, RandomStream};
use crate::parallel;
use crate::partition::{fit_gmm2, partition_scores, Partition, PartitionMethod, DEFAULT_BINS};
use crate::{Error, Result};

pub const ENSEMBLE_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegeneratePolicy {
    /// Keep every sample when the scores carry no signal.
    AllClean,
    /// Fail the run.
    Halt,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorConfig {
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub partition_method: PartitionMethod,
    pub degenerate_policy: DegeneratePolicy,
    #[serde(default = "default_bins")]
    pub otsu_bins: usize,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            warmup_epochs: 10,
            total_epochs: 50,
            partition_method: PartitionMethod::Otsu,
            degenerate_policy: DegeneratePolicy::AllClean,
            otsu_bins: DEFAULT_BINS,
        }
    }
}

impl SelectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.warmup_epochs > self.total_epochs {
            return Err(Error::InvalidArgument(format!(
                "warmup_epochs ({}) exceeds total_epochs ({})",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if self.partition_method == PartitionMethod::Fixed {
            return Err(Error::InvalidArgument(
                "partition_method must be otsu, kmeans or gmm".into(),
            ));
        }
        if self.otsu_bins < 2 {
            return Err(Error::InvalidArgument("otsu_bins must be >= 2".into()));
        }
        Ok(())
    }
}

/// The two peers of classifier `k`.
pub fn peers_of(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

fn init_stream(master_seed: u64, member: usize) -> RandomStream {
    derive_stream(master_seed, stream_id(purpose::INIT, 0, member as u16))
}

fn train_stream(master_seed: u64, epoch: usize, member: usize) -> RandomStream {
    derive_stream(
        master_seed,
        stream_id(purpose::TRAIN, epoch as u32, member as u16),
    )
}

/// Three independently initialised classifiers sharing one training config.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    members: Vec<Classifier>,
    train_cfg: TrainConfig,
    epoch: usize,
}

impl Ensemble {
    pub fn new(d: usize, class_count: usize, train_cfg: TrainConfig, master_seed: u64) -> Self {
        let members = (0..ENSEMBLE_SIZE)
            .map(|k| {
                Classifier::new(init_mlp(
                    d,
                    &train_cfg.hidden_sizes,
                    class_count,
                    &mut init_stream(master_seed, k),
                ))
            })
            .collect();
        Self {
            members,
            train_cfg,
            epoch: 0,
        }
    }

    /// Builds an ensemble from explicit parameters (exactly three).
    pub fn from_params(params: Vec<MlpParams>, train_cfg: TrainConfig) -> Result<Self> {
        if params.len() != ENSEMBLE_SIZE {
            return Err(Error::InvalidArgument(format!(
                "an ensemble has exactly {ENSEMBLE_SIZE} members, got {}",
                params.len()
            )));
        }
        Ok(Self {
            members: params.into_iter().map(Classifier::new).collect(),
            train_cfg,
            epoch: 0,
        })
    }

    pub fn params(&self, k: usize) -> &MlpParams {
        self.members[k].params()
    }

    pub fn member_params(&self) -> Vec<&MlpParams> {
        self.members.iter().map(Classifier::params).collect()
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.train_cfg
    }

    /// Completed training epochs.
    pub fn epoch(&self) -> usize {
        self.epoch
    }
}

/// One classifier's training subset for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Partition over dataset indices.
    pub partition: Partition,
    /// Peers whose agreement produced the partition (`None` for baselines).
    pub peers: Option<(usize, usize)>,
    /// The scores were degenerate and the all-clean fallback applied.
    pub degenerate: bool,
}

fn resolve(
    result: Result<Partition>,
    n: usize,
    method: PartitionMethod,
    policy: DegeneratePolicy,
) -> Result<(Partition, bool)> {
    match result {
        Ok(p) => Ok((p, false)),
        Err(Error::DegenerateScores) if policy == DegeneratePolicy::AllClean => {
            Ok((Partition::all_clean(n, method), true))
        }
        Err(e) => Err(e),
    }
}

fn select_from_predictions(
    predictions: &[ProbMatrix],
    k: usize,
    train_indices: &[usize],
    cfg: &SelectorConfig,
) -> Result<Selection> {
    let (l, m) = peers_of(k);
    let scores = agreement_scores(&predictions[l], &predictions[m])?;
    let method = cfg.partition_method;
    let (partition, degenerate) = resolve(
        partition_scores(&scores, method, cfg.otsu_bins),
        scores.len(),
        method,
        cfg.degenerate_policy,
    )?;
    Ok(Selection {
        partition: partition.map_indices(train_indices),
        peers: Some((l, m)),
        degenerate,
    })
}

/// Partition of `train_indices` for training classifier `k`, computed from
/// the agreement of its two peers. `k` is zero-based (`0..3`).
pub fn pass_select(
    ensemble: &Ensemble,
    ds: &LabeledDataset,
    train_indices: &[usize],
    k: usize,
    cfg: &SelectorConfig,
) -> Result<Selection> {
    if k >= ENSEMBLE_SIZE {
        return Err(Error::InvalidArgument(format!("classifier index {k} out of range")));
    }
    let (l, m) = peers_of(k);
    let mut predictions = vec![ProbMatrix::new(0, 2, Vec::new())?; ENSEMBLE_SIZE];
    predictions[l] = predict_all(ensemble.params(l), ds, train_indices)?;
    predictions[m] = predict_all(ensemble.params(m), ds, train_indices)?;
    select_from_predictions(&predictions, k, train_indices, cfg)
}

/// Agreement scores between the peers of classifier `k` over `indices`.
pub fn peer_scores(
    ensemble: &Ensemble,
    ds: &LabeledDataset,
    indices: &[usize],
    k: usize,
) -> Result<Vec<f64>> {
    let (l, m) = peers_of(k);
    agreement_scores(
        &predict_all(ensemble.params(l), ds, indices)?,
        &predict_all(ensemble.params(m), ds, indices)?,
    )
}

/// What a record's training subset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    /// Warmup epoch on all training samples.
    Warmup,
    /// Trained on all samples by design (the `none` baseline).
    AllData,
    /// Trained on a selected subset.
    Selected(PartitionMethod),
    /// Selection was attempted but degenerate; trained on everything.
    Fallback,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordKind::Warmup => f.write_str("warmup"),
            RecordKind::AllData => f.write_str("none"),
            RecordKind::Selected(m) => write!(f, "{m}"),
            RecordKind::Fallback => f.write_str("all_clean"),
        }
    }
}

/// State of one classifier in one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub classifier: usize,
    pub kind: RecordKind,
    pub peers: Option<(usize, usize)>,
    pub partition: Partition,
    pub quality: SelectionQuality,
    pub train_loss: f64,
}

impl EpochRecord {
    pub fn threshold(&self) -> Option<f64> {
        self.partition.threshold
    }
}

/// Output of a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome<M> {
    pub model: M,
    pub records: Vec<EpochRecord>,
    /// Test accuracy after every epoch (ensemble mean for PASS).
    pub epoch_accuracy: Vec<f64>,
}

fn all_data_partition(train: &[usize]) -> Partition {
    Partition::all_clean(train.len(), PartitionMethod::Fixed).map_indices(train)
}

fn record(
    epoch: usize,
    classifier: usize,
    kind: RecordKind,
    selection: Selection,
    ds: &LabeledDataset,
    train: &[usize],
    train_loss: f64,
) -> EpochRecord {
    let quality = selection_quality(&selection.partition, ds.noise_mask(), train);
    EpochRecord {
        epoch,
        classifier,
        kind,
        peers: selection.peers,
        partition: selection.partition,
        quality,
        train_loss,
    }
}

fn check_split(ds: &LabeledDataset, split: &SplitIndices) -> Result<()> {
    if split.train.is_empty() {
        return Err(Error::EmptySubset);
    }
    if split.train.iter().chain(&split.test).any(|&i| i >= ds.len()) {
        return Err(Error::InvalidArgument("split index out of range".into()));
    }
    Ok(())
}

/// Runs the full PASS schedule. Deterministic given `master_seed`: member `k`
/// is initialised from stream `(INIT, 0, k)` and trains epoch `e` with stream
/// `(TRAIN, e, k)`.
pub fn pass_train(
    ds: &LabeledDataset,
    split: &SplitIndices,
    selector_cfg: &SelectorConfig,
    train_cfg: &TrainConfig,
    master_seed: u64,
) -> Result<TrainOutcome<Ensemble>> {
    selector_cfg.validate()?;
    train_cfg.validate()?;
    check_split(ds, split)?;
    let train = &split.train[..];
    let mut ensemble = Ensemble::new(ds.dim(), ds.class_count(), train_cfg.clone(), master_seed);
    let mut records = Vec::with_capacity(selector_cfg.total_epochs * ENSEMBLE_SIZE);
    let mut epoch_accuracy = Vec::with_capacity(selector_cfg.total_epochs);

    for epoch in 0..selector_cfg.total_epochs {
        let selections: Vec<(RecordKind, Selection)> = if epoch < selector_cfg.warmup_epochs {
            (0..ENSEMBLE_SIZE)
                .map(|_| {
                    let sel = Selection {
                        partition: all_data_partition(train),
                        peers: None,
                        degenerate: false,
                    };
                    (RecordKind::Warmup, sel)
                })
                .collect()
        } else {
            let members = &ensemble.members;
            let predictions = parallel::map_range(ENSEMBLE_SIZE, |k| {
                predict_all(members[k].params(), ds, train)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            parallel::map_range(ENSEMBLE_SIZE, |k| {
                select_from_predictions(&predictions, k, train, selector_cfg)
            })
            .into_iter()
            .map(|sel| {
                sel.map(|s| {
                    let kind = if s.degenerate {
                        RecordKind::Fallback
                    } else {
                        RecordKind::Selected(selector_cfg.partition_method)
                    };
                    (kind, s)
                })
            })
            .collect::<Result<Vec<_>>>()?
        };

        let losses = parallel::map_mut(&mut ensemble.members, |k, member| {
            let subset = &selections[k].1.partition.clean;
            member.train_epoch(ds, subset, train_cfg, &mut train_stream(master_seed, epoch, k))
        })
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        ensemble.epoch += 1;

        for (k, ((kind, sel), loss)) in selections.into_iter().zip(losses).enumerate() {
            records.push(record(epoch, k, kind, sel, ds, train, loss));
        }
        epoch_accuracy.push(test_accuracy(&ensemble.member_params(), ds, &split.test)?);
    }
    Ok(TrainOutcome {
        model: ensemble,
        records,
        epoch_accuracy,
    })
}

/// Per-sample cross-entropy against the noisy labels.
pub fn sample_losses(params: &MlpParams, ds: &LabeledDataset, indices: &[usize]) -> Result<Vec<f64>> {
    let probs = predict_all(params, ds, indices)?;
    Ok(indices
        .iter()
        .enumerate()
        .map(|(r, &i)| cross_entropy(probs.row(r), ds.noisy_labels()[i]))
        .collect())
}

/// Small-loss selection: fit a two-component GMM to min-max normalised
/// per-sample losses; clean = posterior of the lower-mean component >= 0.5.
/// Degenerate losses fall back to all clean.
pub fn small_loss_from_losses(losses: &[f64]) -> Result<(Partition, bool)> {
    let min = losses.iter().copied().fold(f64::INFINITY, f64::min);
    let max = losses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return Ok((Partition::all_clean(losses.len(), PartitionMethod::Gmm), true));
    }
    let normalised: Vec<f64> = losses.iter().map(|l| (l - min) / (max - min)).collect();
    let model = match fit_gmm2(&normalised) {
        Ok(m) => m,
        Err(Error::DegenerateScores) => {
            return Ok((Partition::all_clean(losses.len(), PartitionMethod::Gmm), true))
        }
        Err(e) => return Err(e),
    };
    let lower = 1 - model.upper();
    let mut clean = Vec::new();
    let mut noisy = Vec::new();
    for (i, &v) in normalised.iter().enumerate() {
        if model.posterior(v)[lower] >= 0.5 {
            clean.push(i);
        } else {
            noisy.push(i);
        }
    }
    Ok((
        Partition {
            clean,
            noisy,
            threshold: None,
            method: PartitionMethod::Gmm,
        },
        false,
    ))
}

pub fn small_loss_select(
    params: &MlpParams,
    ds: &LabeledDataset,
    train_indices: &[usize],
) -> Result<Selection> {
    let losses = sample_losses(params, ds, train_indices)?;
    let (partition, degenerate) = small_loss_from_losses(&losses)?;
    Ok(Selection {
        partition: partition.map_indices(train_indices),
        peers: None,
        degenerate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineSelector {
    /// Train on all noisy data.
    None,
    /// Small-loss selection every epoch after warmup.
    SmallLoss,
}

/// Single-classifier control arm. Uses the same streams as PASS member 0, so
/// it is initialised identically and shares its warmup trajectory.
pub fn baseline_train(
    ds: &LabeledDataset,
    split: &SplitIndices,
    selector_cfg: &SelectorConfig,
    train_cfg: &TrainConfig,
    master_seed: u64,
    selector: BaselineSelector,
) -> Result<TrainOutcome<MlpParams>> {
    selector_cfg.validate()?;
    train_cfg.validate()?;
    check_split(ds, split)?;
    let train = &split.train[..];
    let mut clf = Classifier::new(init_mlp(
        ds.dim(),
        &train_cfg.hidden_sizes,
        ds.class_count(),
        &mut init_stream(master_seed, 0),
    ));
    let mut records = Vec::with_capacity(selector_cfg.total_epochs);
    let mut epoch_accuracy = Vec::with_capacity(selector_cfg.total_epochs);

    for epoch in 0..selector_cfg.total_epochs {
        let selecting =
            selector == BaselineSelector::SmallLoss && epoch >= selector_cfg.warmup_epochs;
        let (kind, sel) = if selecting {
            let sel = small_loss_select(clf.params(), ds, train)?;
            if sel.degenerate && selector_cfg.degenerate_policy == DegeneratePolicy::Halt {
                return Err(Error::DegenerateScores);
            }
            let kind = if sel.degenerate {
                RecordKind::Fallback
            } else {
                RecordKind::Selected(PartitionMethod::Gmm)
            };
            (kind, sel)
        } else {
            let sel = Selection {
                partition: all_data_partition(train),
                peers: None,
                degenerate: false,
            };
            let kind = match selector {
                BaselineSelector::None => RecordKind::AllData,
                BaselineSelector::SmallLoss => RecordKind::Warmup,
            };
            (kind, sel)
        };
        let loss = clf.train_epoch(
            ds,
            &sel.partition.clean,
            train_cfg,
            &mut train_stream(master_seed, epoch, 0),
        )?;
        records.push(record(epoch, 0, kind, sel, ds, train, loss));
        epoch_accuracy.push(test_accuracy(&[clf.params()], ds, &split.test)?);
    }
    Ok(TrainOutcome {
        model: clf.into_params(),
        records,
        epoch_accuracy,
    })
}

pub const RECORDS_HEADER: &str =
    "epoch,classifier,method,threshold,n_clean,n_noisy,precision,recall,f1,clean_ratio,train_loss";

/// Writes records as CSV. Classifiers are numbered from 1; a missing
/// threshold is an empty field.
pub fn write_records<W: Write>(records: &[EpochRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{RECORDS_HEADER}")?;
    for r in records {
        let threshold = r.threshold().map(|t| t.to_string()).unwrap_or_default();
        let q = &r.quality;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch + 1,
            r.classifier + 1,
            r.kind,
            threshold,
            r.partition.clean.len(),
            r.partition.noisy.len(),
            q.precision,
            q.recall,
            q.f1,
            q.clean_ratio,
            r.train_loss
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_gaussian_mixture, split};

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            hidden_sizes: vec![8],
            epochs: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn peers_exclude_self() {
        for k in 0..3 {
            let (l, m) = peers_of(k);
            assert!(l != k && m != k && l != m);
        }
    }

    #[test]
    fn identical_peers_are_degenerate() {
        let ds = generate_gaussian_mixture(60, 2, 3, 3.0, 1).unwrap();
        let p = init_mlp(2, &[8], 3, &mut derive_stream(3, 3));
        let ens = Ensemble::from_params(vec![p.clone(), p.clone(), p], tiny_cfg()).unwrap();
        let train: Vec<usize> = (0..60).collect();
        let sel = pass_select(&ens, &ds, &train, 0, &SelectorConfig::default()).unwrap();
        assert!(sel.degenerate);
        assert_eq!(sel.partition.clean, train);

        let halt = SelectorConfig {
            degenerate_policy: DegeneratePolicy::Halt,
            ..SelectorConfig::default()
        };
        assert!(matches!(
            pass_select(&ens, &ds, &train, 0, &halt),
            Err(Error::DegenerateScores)
        ));
    }

    #[test]
    fn peer_order_does_not_matter() {
        let ds = generate_gaussian_mixture(80, 2, 3, 2.0, 2).unwrap();
        let a = init_mlp(2, &[8], 3, &mut derive_stream(1, 1));
        let b = init_mlp(2, &[8], 3, &mut derive_stream(1, 2));
        let c = init_mlp(2, &[8], 3, &mut derive_stream(1, 3));
        let train: Vec<usize> = (0..80).collect();
        let cfg = SelectorConfig::default();
        let e1 = Ensemble::from_params(vec![a.clone(), b.clone(), c.clone()], tiny_cfg()).unwrap();
        let e2 = Ensemble::from_params(vec![a, c, b], tiny_cfg()).unwrap();
        assert_eq!(
            pass_select(&e1, &ds, &train, 0, &cfg).unwrap().partition,
            pass_select(&e2, &ds, &train, 0, &cfg).unwrap().partition
        );
    }

    #[test]
    fn small_loss_bimodal_and_degenerate() {
        let mut losses = vec![0.01; 500];
        losses.extend(vec![3.0; 500]);
        let (p, degenerate) = small_loss_from_losses(&losses).unwrap();
        assert!(!degenerate);
        assert_eq!(p.clean, (0..500).collect::<Vec<_>>());

        let (p, degenerate) = small_loss_from_losses(&[4f64.ln(); 10]).unwrap();
        assert!(degenerate);
        assert_eq!(p.clean.len(), 10);
    }

    #[test]
    fn untrained_uniform_network_keeps_everything() {
        let ds = generate_gaussian_mixture(40, 2, 4, 3.0, 1).unwrap();
        let idx: Vec<usize> = (0..40).collect();
        let sel = small_loss_select(&MlpParams::zeros(2, &[4], 4), &ds, &idx).unwrap();
        assert!(sel.degenerate);
        assert_eq!(sel.partition.clean, idx);
    }

    #[test]
    fn warmup_only_schedule_matches_baseline() {
        let ds = generate_gaussian_mixture(120, 3, 3, 3.0, 4).unwrap();
        let sp = split(&ds, 0.25, 4).unwrap();
        let sel = SelectorConfig {
            warmup_epochs: 3,
            total_epochs: 3,
            ..SelectorConfig::default()
        };
        let pass = pass_train(&ds, &sp, &sel, &tiny_cfg(), 9).unwrap();
        let none = baseline_train(&ds, &sp, &sel, &tiny_cfg(), 9, BaselineSelector::None).unwrap();
        assert_eq!(pass.model.params(0), &none.model);
        assert!(pass.records.iter().all(|r| r.kind == RecordKind::Warmup));
        assert_eq!(pass.model.epoch(), 3);
    }

    #[test]
    fn rotation_and_self_exclusion() {
        let ds = generate_gaussian_mixture(150, 3, 3, 2.0, 5).unwrap();
        let sp = split(&ds, 0.2, 5).unwrap();
        let sel = SelectorConfig {
            warmup_epochs: 2,
            total_epochs: 5,
            ..SelectorConfig::default()
        };
        let out = pass_train(&ds, &sp, &sel, &tiny_cfg(), 1).unwrap();
        for epoch in 2..5 {
            let rows: Vec<_> = out.records.iter().filter(|r| r.epoch == epoch).collect();
            let trained: Vec<usize> = rows.iter().map(|r| r.classifier).collect();
            assert_eq!(trained, vec![0, 1, 2]);
            let mut peer_uses = [0; 3];
            for r in &rows {
                let (l, m) = r.peers.unwrap();
                assert!(l != r.classifier && m != r.classifier);
                peer_uses[l] += 1;
                peer_uses[m] += 1;
            }
            assert_eq!(peer_uses, [2, 2, 2]);
        }
        for r in &out.records {
            assert_eq!(r.partition.len(), sp.train.len());
        }
    }

    #[test]
    fn invalid_configs() {
        let bad = SelectorConfig {
            warmup_epochs: 5,
            total_epochs: 4,
            ..SelectorConfig::default()
        };
        assert!(bad.validate().is_err());
        let fixed = SelectorConfig {
            partition_method: PartitionMethod::Fixed,
            ..SelectorConfig::default()
        };
        assert!(fixed.validate().is_err());
    }
}

#[cfg(test)]
mod record_tests {
    use super::*;
    use crate::data::{generate_gaussian_mixture, split};

    #[test]
    fn records_csv_layout() {
        let ds = generate_gaussian_mixture(90, 2, 3, 3.0, 1).unwrap();
        let sp = split(&ds, 0.2, 1).unwrap();
        let sel = SelectorConfig {
            warmup_epochs: 1,
            total_epochs: 2,
            ..SelectorConfig::default()
        };
        let cfg = TrainConfig {
            hidden_sizes: vec![4],
            ..TrainConfig::default()
        };
        let out = baseline_train(&ds, &sp, &sel, &cfg, 2, BaselineSelector::SmallLoss).unwrap();
        let mut buf = Vec::new();
        write_records(&out.records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RECORDS_HEADER);
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("1,1,warmup,,72,0,"));
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 11);
        }
    }
}

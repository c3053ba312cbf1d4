//! Seeded experiment runs: data preparation, the three comparison arms and
//! the ablation over partition methods.

use std::fmt;

use pass_core::data::{
    generate_gaussian_mixture, inject_idn_noise, inject_symmetric_noise, split, LabeledDataset,
    SplitIndices,
};
use pass_core::metrics::{test_accuracy, SelectionQuality};
use pass_core::partition::PartitionMethod;
use pass_core::selectors::{
    baseline_train, pass_train, BaselineSelector, EpochRecord, SelectorConfig,
};
use serde::Serialize;

use crate::config::{ExperimentConfig, NoiseKind};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Pass,
    SmallLoss,
    None,
}

impl Arm {
    pub const ALL: [Arm; 3] = [Arm::Pass, Arm::SmallLoss, Arm::None];

    pub fn name(self) -> &'static str {
        match self {
            Arm::Pass => "pass",
            Arm::SmallLoss => "small_loss",
            Arm::None => "none",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Noisy dataset and split for one seed. Every arm of a seed uses the same one.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub dataset: LabeledDataset,
    pub split: SplitIndices,
}

impl PreparedData {
    pub fn realized_noise_rate(&self) -> f64 {
        self.dataset.noise_rate()
    }
}

pub fn prepare_data(cfg: &ExperimentConfig, seed: u64) -> Result<PreparedData, CliError> {
    let d = &cfg.dataset;
    let clean = generate_gaussian_mixture(d.n, d.d, d.classes, d.separation, seed)?;
    let dataset = if d.noise_rate == 0.0 {
        clean
    } else {
        match d.noise_kind {
            NoiseKind::Idn => inject_idn_noise(&clean, d.noise_rate, seed)?,
            NoiseKind::Symmetric => inject_symmetric_noise(&clean, d.noise_rate, seed)?,
        }
    };
    let split = split(&dataset, d.test_fraction, seed)?;
    Ok(PreparedData { dataset, split })
}

/// Final-epoch results of one arm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArmSummary {
    pub seed: u64,
    pub arm: Arm,
    pub epochs: usize,
    /// Final-epoch selection quality (mean over the three classifiers for PASS).
    pub selection: SelectionQuality,
    pub test_acc: f64,
    /// Final test accuracy of each PASS member on its own.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub member_test_acc: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct ArmRun {
    pub summary: ArmSummary,
    pub records: Vec<EpochRecord>,
    pub epoch_accuracy: Vec<f64>,
}

/// Averages the selection quality of the last epoch's records.
pub fn final_quality(records: &[EpochRecord]) -> SelectionQuality {
    let Some(last) = records.last().map(|r| r.epoch) else {
        return SelectionQuality {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            clean_ratio: 0.0,
            empty_selection: true,
        };
    };
    let rows: Vec<&SelectionQuality> = records
        .iter()
        .filter(|r| r.epoch == last)
        .map(|r| &r.quality)
        .collect();
    let mean = |f: fn(&SelectionQuality) -> f64| rows.iter().map(|q| f(q)).sum::<f64>() / rows.len() as f64;
    SelectionQuality {
        precision: mean(|q| q.precision),
        recall: mean(|q| q.recall),
        f1: mean(|q| q.f1),
        clean_ratio: mean(|q| q.clean_ratio),
        empty_selection: rows.iter().any(|q| q.empty_selection),
    }
}

pub fn run_arm(
    cfg: &ExperimentConfig,
    selector: &SelectorConfig,
    data: &PreparedData,
    seed: u64,
    arm: Arm,
) -> Result<ArmRun, CliError> {
    let train = cfg.train_config();
    let mut member_test_acc = None;
    let (records, epoch_accuracy) = match arm {
        Arm::Pass => {
            let out = pass_train(&data.dataset, &data.split, selector, &train, seed)?;
            member_test_acc = Some(
                out.model
                    .member_params()
                    .into_iter()
                    .map(|p| test_accuracy(&[p], &data.dataset, &data.split.test))
                    .collect::<Result<Vec<_>, _>>()?,
            );
            (out.records, out.epoch_accuracy)
        }
        Arm::SmallLoss | Arm::None => {
            let which = if arm == Arm::SmallLoss {
                BaselineSelector::SmallLoss
            } else {
                BaselineSelector::None
            };
            let out = baseline_train(&data.dataset, &data.split, selector, &train, seed, which)?;
            (out.records, out.epoch_accuracy)
        }
    };
    let summary = ArmSummary {
        seed,
        arm,
        epochs: epoch_accuracy.len(),
        selection: final_quality(&records),
        test_acc: epoch_accuracy.last().copied().unwrap_or(0.0),
        member_test_acc,
    };
    Ok(ArmRun {
        summary,
        records,
        epoch_accuracy,
    })
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub realized_noise_rate: f64,
    pub arms: Vec<ArmRun>,
    pub seconds: f64,
}

pub fn run_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedRun, CliError> {
    let start = std::time::Instant::now();
    let data = prepare_data(cfg, seed)?;
    let arms = Arm::ALL
        .iter()
        .map(|&arm| run_arm(cfg, &cfg.selector, &data, seed, arm))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SeedRun {
        seed,
        realized_noise_rate: data.realized_noise_rate(),
        arms,
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub const ABLATION_METHODS: [PartitionMethod; 3] =
    [PartitionMethod::Otsu, PartitionMethod::KMeans, PartitionMethod::Gmm];

pub const ABLATION_HEADER: &str = "seed,method,f1,precision,clean_ratio,test_acc";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub seed: u64,
    pub method: PartitionMethod,
    pub f1: f64,
    pub precision: f64,
    pub clean_ratio: f64,
    pub test_acc: f64,
}

pub fn ablate_seed(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<AblationRow>, CliError> {
    let data = prepare_data(cfg, seed)?;
    ABLATION_METHODS
        .iter()
        .map(|&method| {
            let selector = SelectorConfig {
                partition_method: method,
                ..cfg.selector.clone()
            };
            let run = run_arm(cfg, &selector, &data, seed, Arm::Pass)?;
            let q = run.summary.selection;
            Ok(AblationRow {
                seed,
                method,
                f1: q.f1,
                precision: q.precision,
                clean_ratio: q.clean_ratio,
                test_acc: run.summary.test_acc,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    if values.is_empty() {
        return MeanStd { mean: 0.0, std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std }
}

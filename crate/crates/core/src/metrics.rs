//! Selection quality against the ground-truth noise mask, and test accuracy.
//!
//! The positive class is "truly clean": precision is the purity of the
//! selected training set, recall the share of clean samples it retains.

use serde::{Deserialize, Serialize};

use crate::classifier::{predict_all, MlpParams};
use crate::data::LabeledDataset;
use crate::partition::Partition;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionQuality {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub clean_ratio: f64,
    /// Nothing was selected; precision is reported as 0.
    pub empty_selection: bool,
}

/// `f1 = 2pr / (p + r)`, or 0 when `p + r = 0`.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Quality of `partition.clean` (dataset indices) over `train_indices`.
pub fn selection_quality(
    partition: &Partition,
    noise_mask: &[bool],
    train_indices: &[usize],
) -> SelectionQuality {
    let selected = partition.clean.len();
    let hits = partition.clean.iter().filter(|&&i| !noise_mask[i]).count();
    let truly_clean = train_indices.iter().filter(|&&i| !noise_mask[i]).count();

    let precision = if selected > 0 {
        hits as f64 / selected as f64
    } else {
        0.0
    };
    let recall = if truly_clean > 0 {
        hits as f64 / truly_clean as f64
    } else {
        0.0
    };
    SelectionQuality {
        precision,
        recall,
        f1: f1_score(precision, recall),
        clean_ratio: if train_indices.is_empty() {
            0.0
        } else {
            selected as f64 / train_indices.len() as f64
        },
        empty_selection: selected == 0,
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &x)| if x > best.1 { (k, x) } else { best })
        .0
}

/// Accuracy against clean labels of the mean predictive distribution of
/// `members` (a single classifier is a one-member ensemble).
pub fn test_accuracy(members: &[&MlpParams], ds: &LabeledDataset, test_indices: &[usize]) -> Result<f64> {
    if test_indices.is_empty() || members.is_empty() {
        return Ok(0.0);
    }
    let preds = members
        .iter()
        .map(|m| predict_all(m, ds, test_indices))
        .collect::<Result<Vec<_>>>()?;
    let c = ds.class_count();
    let mut mean = vec![0.0; c];
    let mut correct = 0usize;
    for (r, &i) in test_indices.iter().enumerate() {
        mean.iter_mut().for_each(|v| *v = 0.0);
        for p in &preds {
            for (m, v) in mean.iter_mut().zip(p.row(r)) {
                *m += v;
            }
        }
        if argmax(&mean) == ds.clean_labels()[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test_indices.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::PartitionMethod;

    fn part(clean: Vec<usize>, noisy: Vec<usize>) -> Partition {
        Partition {
            clean,
            noisy,
            threshold: None,
            method: PartitionMethod::Fixed,
        }
    }

    #[test]
    fn perfect_selection() {
        let mask = [false, true, false, true, false];
        let q = selection_quality(&part(vec![0, 2, 4], vec![1, 3]), &mask, &[0, 1, 2, 3, 4]);
        assert_eq!((q.precision, q.recall, q.f1), (1.0, 1.0, 1.0));
        assert_eq!(q.clean_ratio, 0.6);
    }

    #[test]
    fn select_everything_at_half_noise() {
        let mask: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let all: Vec<usize> = (0..10).collect();
        let q = selection_quality(&part(all.clone(), vec![]), &mask, &all);
        assert_eq!(q.precision, 0.5);
        assert_eq!(q.recall, 1.0);
        assert!((q.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(q.clean_ratio, 1.0);
    }

    #[test]
    fn hand_count() {
        // clean samples are {1, 2}
        let mask = [true, false, false, true];
        let q = selection_quality(&part(vec![0, 1], vec![2, 3]), &mask, &[0, 1, 2, 3]);
        assert_eq!((q.precision, q.recall, q.f1, q.clean_ratio), (0.5, 0.5, 0.5, 0.5));
    }

    #[test]
    fn empty_selection_is_flagged() {
        let q = selection_quality(&part(vec![], vec![0, 1]), &[false, true], &[0, 1]);
        assert!(q.empty_selection);
        assert_eq!(q.precision, 0.0);
        assert_eq!(q.f1, 0.0);
    }

    #[test]
    fn argmax_ties_take_lowest() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.1, 0.3, 0.3, 0.2]), 1);
    }
}

// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn class_counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|l| **l).count();
    (pos, labels.len() - pos)
}

fn require_both_classes(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined(format!(
            "AUC needs both classes ({pos} positives, {neg} negatives)"
        )));
    }
    Ok((pos, neg))
}

/// Area under the ROC curve as a rank statistic, ties counted one half.
///
/// Pairs are counted in doubled integers and divided once, so the result is
/// the correctly rounded value of the exact fraction.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = require_both_classes(scores, labels)?;
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::InvalidInput(format!("score {i} is NaN")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut doubled: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        let (mut p, mut q) = (0u64, 0u64);
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                p += 1;
            } else {
                q += 1;
            }
            k += 1;
        }
        doubled += 2 * p * neg_below + p * q;
        neg_below += q;
    }
    Ok(doubled as f64 / (2 * pos as u64 * neg as u64) as f64)
}

/// Which class F1 treats as positive. Labels use `true` for CANDIDATE.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum F1Class {
    #[default]
    Mainstream,
    Candidate,
}

/// Counts with CANDIDATE (label `true`) as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn f1_score(tp: usize, fp: usize, fn_: usize) -> f64 {
    let d = 2 * tp + fp + fn_;
    if d == 0 {
        0.0
    } else {
        2.0 * tp as f64 / d as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub threshold: f64,
    pub f1_class: F1Class,
    pub confusion: Confusion,
    pub accuracy: f64,
    /// F1 for `f1_class`.
    pub f1: f64,
    pub f1_candidate: f64,
    pub f1_mainstream: f64,
    pub macro_f1: f64,
}

/// Confusion arithmetic without the two-class requirement.
pub(crate) fn confusion_metrics(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    f1_class: F1Class,
) -> ClassificationMetrics {
    let mut c = Confusion::default();
    for (s, &y) in scores.iter().zip(labels) {
        match (*s >= threshold, y) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let n = scores.len();
    let f1_candidate = f1_score(c.tp, c.fp, c.fn_);
    let f1_mainstream = f1_score(c.tn, c.fn_, c.fp);
    ClassificationMetrics {
        threshold,
        f1_class,
        confusion: c,
        accuracy: if n == 0 { 0.0 } else { (c.tp + c.tn) as f64 / n as f64 },
        f1: match f1_class {
            F1Class::Candidate => f1_candidate,
            F1Class::Mainstream => f1_mainstream,
        },
        f1_candidate,
        f1_mainstream,
        macro_f1: 0.5 * (f1_candidate + f1_mainstream),
    }
}

/// Thresholded metrics; a score at or above `threshold` predicts CANDIDATE.
pub fn classification_metrics(
    scores: &[f64],
    labels: &[bool],
    threshold: f64,
    f1_class: F1Class,
) -> Result<ClassificationMetrics> {
    require_both_classes(scores, labels)?;
    Ok(confusion_metrics(scores, labels, threshold, f1_class))
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSd {
    /// `None` when there are no values.
    pub fn of(values: &[f64]) -> Option<MeanSd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(MeanSd { mean, sd: var.sqrt(), n: values.len() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair_oracle(scores: &[f64], labels: &[bool]) -> f64 {
        let mut c = 0.0;
        let mut pairs = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        c += 1.0;
                    } else if scores[i] == scores[j] {
                        c += 0.5;
                    }
                }
            }
        }
        c / pairs
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(), 1.0);
        assert_eq!(auc(&[0.3; 4], &[true, false, true, false]).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.9], &[true, false]).unwrap(), 0.0);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::Undefined(_))));
    }

    #[test]
    fn f1_by_hand() {
        assert!((f1_score(3, 1, 2) - 6.0 / 9.0).abs() < 1e-15);
        let m = classification_metrics(&[0.9, 0.1], &[true, false], 0.5, F1Class::Candidate).unwrap();
        assert_eq!((m.f1, m.accuracy, m.macro_f1), (1.0, 1.0, 1.0));
        let m = classification_metrics(&[0.1, 0.1, 0.1], &[true, false, true], 0.5, F1Class::Candidate).unwrap();
        assert_eq!(m.f1, 0.0);
        assert_eq!(m.f1_mainstream, f1_score(1, 2, 0));
    }

    #[test]
    fn mean_sd_is_population() {
        let s = MeanSd::of(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.sd), (2.0, 1.0));
        assert!(MeanSd::of(&[]).is_none());
    }

    proptest! {
        #[test]
        fn auc_matches_pair_oracle(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..50)
        ) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|(_, l)| *l).collect();
            let (pos, neg) = class_counts(&labels);
            prop_assume!(pos > 0 && neg > 0);
            prop_assert_eq!(auc(&scores, &labels).unwrap(), pair_oracle(&scores, &labels));
        }
    }
}

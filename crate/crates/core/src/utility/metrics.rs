//! Classification metrics on class-index labels and probability rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;

/// Probability clip applied before taking logs.
pub const LOG_LOSS_EPS: f64 = 1e-15;

/// Highest-probability class, ties to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

pub fn accuracy(y: &[usize], pred: &[usize]) -> f64 {
    y.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / y.len() as f64
}

fn present_classes(y: &[usize], n_classes: usize) -> Vec<usize> {
    let mut support = vec![0usize; n_classes];
    for &c in y {
        support[c] += 1;
    }
    support
}

/// Mean per-class recall over classes present in `y`; `None` with fewer
/// than two present classes.
pub fn balanced_accuracy(y: &[usize], pred: &[usize], n_classes: usize) -> Option<f64> {
    let support = present_classes(y, n_classes);
    let present: Vec<usize> = (0..n_classes).filter(|&c| support[c] > 0).collect();
    if present.len() < 2 {
        return None;
    }
    let mut hits = vec![0usize; n_classes];
    for (&t, &p) in y.iter().zip(pred) {
        if t == p {
            hits[t] += 1;
        }
    }
    Some(present.iter().map(|&c| hits[c] as f64 / support[c] as f64).sum::<f64>() / present.len() as f64)
}

/// Per-class F1 averaged with true-class support weights. A class with no
/// predicted and no true rows has F1 0.
pub fn weighted_f1(y: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    let support = present_classes(y, n_classes);
    let mut tp = vec![0usize; n_classes];
    let mut predicted = vec![0usize; n_classes];
    for (&t, &p) in y.iter().zip(pred) {
        predicted[p] += 1;
        if t == p {
            tp[t] += 1;
        }
    }
    let n = y.len() as f64;
    (0..n_classes)
        .filter(|&c| support[c] > 0)
        .map(|c| {
            let denom = predicted[c] + support[c];
            let f1 = if denom == 0 { 0.0 } else { 2.0 * tp[c] as f64 / denom as f64 };
            f1 * support[c] as f64 / n
        })
        .sum()
}

/// Mann–Whitney estimate of `P(score_pos > score_neg) + ½ P(tie)`.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: scores.len(), got: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::OneClassOnly);
    }
    let ranks = stats::average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r).sum();
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok(((rank_sum - p * (p + 1.0) / 2.0) / (p * q)).clamp(0.0, 1.0))
}

/// Binary AUC on class 1, or the support-weighted one-vs-rest average over
/// classes that have both positives and negatives. `None` when no class does.
pub fn roc_auc_multiclass(y: &[usize], proba: &[Vec<f64>], n_classes: usize) -> Option<f64> {
    let support = present_classes(y, n_classes);
    if n_classes == 2 {
        let scores: Vec<f64> = proba.iter().map(|p| p[1]).collect();
        let labels: Vec<bool> = y.iter().map(|&c| c == 1).collect();
        return roc_auc(&scores, &labels).ok();
    }
    let mut acc = 0.0;
    let mut weight = 0usize;
    for c in (0..n_classes).filter(|&c| support[c] > 0 && support[c] < y.len()) {
        let scores: Vec<f64> = proba.iter().map(|p| p[c]).collect();
        let labels: Vec<bool> = y.iter().map(|&t| t == c).collect();
        acc += support[c] as f64 * roc_auc(&scores, &labels).ok()?;
        weight += support[c];
    }
    (weight > 0).then(|| acc / weight as f64)
}

/// Mean negative log-probability of the true class, clipped.
pub fn log_loss(y: &[usize], proba: &[Vec<f64>]) -> f64 {
    let total: f64 = y.iter().zip(proba).map(|(&t, p)| -p[t].clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS).ln()).sum();
    total / y.len() as f64
}

/// The five scores of one fitted model on one evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    /// Absent when the evaluation labels hold a single class.
    pub balanced_accuracy: Option<f64>,
    pub weighted_f1: f64,
    /// Absent when the evaluation labels hold a single class.
    pub roc_auc: Option<f64>,
    pub log_loss: f64,
}

impl MetricSet {
    pub fn compute(y: &[usize], proba: &[Vec<f64>], n_classes: usize) -> Self {
        let pred: Vec<usize> = proba.iter().map(|p| argmax(p)).collect();
        MetricSet {
            accuracy: accuracy(y, &pred),
            balanced_accuracy: balanced_accuracy(y, &pred, n_classes),
            weighted_f1: weighted_f1(y, &pred, n_classes),
            roc_auc: roc_auc_multiclass(y, proba, n_classes),
            log_loss: log_loss(y, proba),
        }
    }

    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Accuracy => Some(self.accuracy),
            Metric::BalancedAccuracy => self.balanced_accuracy,
            Metric::WeightedF1 => Some(self.weighted_f1),
            Metric::RocAuc => self.roc_auc,
            Metric::LogLoss => Some(self.log_loss),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    BalancedAccuracy,
    WeightedF1,
    RocAuc,
    LogLoss,
}

impl Metric {
    pub const ALL: [Metric; 5] =
        [Metric::Accuracy, Metric::BalancedAccuracy, Metric::WeightedF1, Metric::RocAuc, Metric::LogLoss];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::BalancedAccuracy => "balanced_accuracy",
            Metric::WeightedF1 => "weighted_f1",
            Metric::RocAuc => "roc_auc",
            Metric::LogLoss => "log_loss",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Whether larger values are better.
    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::LogLoss)
    }
}

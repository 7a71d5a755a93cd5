//! Reference learners: a kNN vote and multinomial logistic regression.

use serde_json::json;

use crate::encoder::EncodedMatrix;
use crate::error::{Error, Result};
use crate::neighbors::KdTree;

/// A trainable classifier configuration.
pub trait Learner: Send + Sync {
    fn name(&self) -> String;
    /// Hyperparameters, recorded in reports.
    fn params(&self) -> serde_json::Value;
    fn fit(&self, x: &EncodedMatrix, y: &[usize], n_classes: usize, seed: u64) -> Result<Box<dyn FittedModel>>;
}

pub trait FittedModel: Send + Sync {
    fn n_classes(&self) -> usize;
    /// One probability row per input row; rows sum to 1.
    fn predict_proba(&self, x: &EncodedMatrix) -> Result<Vec<Vec<f64>>>;
}

pub(crate) fn check_training(x: &EncodedMatrix, y: &[usize], n_classes: usize) -> Result<()> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.n_rows(), got: y.len() });
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidParameter(format!("label {bad} outside {n_classes} classes")));
    }
    if y.is_empty() || y.iter().all(|&c| c == y[0]) {
        return Err(Error::SingleClassTraining);
    }
    Ok(())
}

/// Majority vote among the `k` nearest training rows (ties in distance go to
/// the lower row index); probabilities are vote fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnLearner {
    pub k: usize,
}

impl Default for KnnLearner {
    fn default() -> Self {
        KnnLearner { k: 5 }
    }
}

struct KnnModel {
    tree: KdTree,
    y: Vec<usize>,
    k: usize,
    n_classes: usize,
}

impl Learner for KnnLearner {
    fn name(&self) -> String {
        format!("knn{}", self.k)
    }

    fn params(&self) -> serde_json::Value {
        json!({ "kind": "knn", "k": self.k })
    }

    fn fit(&self, x: &EncodedMatrix, y: &[usize], n_classes: usize, _seed: u64) -> Result<Box<dyn FittedModel>> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be positive".into()));
        }
        check_training(x, y, n_classes)?;
        Ok(Box::new(KnnModel { tree: KdTree::build(x.clone()), y: y.to_vec(), k: self.k.min(y.len()), n_classes }))
    }
}

impl FittedModel for KnnModel {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &EncodedMatrix) -> Result<Vec<Vec<f64>>> {
        if x.n_cols() != self.tree.dim() {
            return Err(Error::DimensionMismatch { expected: self.tree.dim(), got: x.n_cols() });
        }
        Ok(x.rows()
            .map(|q| {
                let hits = self.tree.knn(q, self.k, None);
                let mut p = vec![0.0; self.n_classes];
                for h in &hits {
                    p[self.y[h.index]] += 1.0;
                }
                let total = hits.len() as f64;
                p.iter_mut().for_each(|v| *v /= total);
                p
            })
            .collect())
    }
}

/// Softmax regression trained by full-batch gradient descent from zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticLearner {
    pub learning_rate: f64,
    pub epochs: usize,
    /// L2 penalty on non-intercept weights.
    pub l2: f64,
}

impl Default for LogisticLearner {
    fn default() -> Self {
        LogisticLearner { learning_rate: 0.5, epochs: 300, l2: 1e-4 }
    }
}

/// Weights are `n_classes × (d + 1)`, intercept first.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    weights: Vec<Vec<f64>>,
}

impl LogisticModel {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let width = weights.first().map_or(0, Vec::len);
        if weights.len() < 2 || width == 0 || weights.iter().any(|w| w.len() != width) {
            return Err(Error::InvalidParameter("weights must be a non-empty k x (d + 1) matrix with k >= 2".into()));
        }
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }
}

fn softmax_row(w: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let z: Vec<f64> = w.iter().map(|wc| wc[0] + wc[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).collect();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Mean cross-entropy plus `l2/2 · ‖W‖²` (intercepts excluded) and its
/// gradient with respect to `w`.
pub fn loss_and_gradient(w: &[Vec<f64>], x: &EncodedMatrix, y: &[usize], l2: f64) -> (f64, Vec<Vec<f64>>) {
    let n = x.n_rows() as f64;
    let mut grad = vec![vec![0.0; w[0].len()]; w.len()];
    let mut loss = 0.0;
    for (row, &t) in x.rows().zip(y) {
        let p = softmax_row(w, row);
        loss -= p[t].max(f64::MIN_POSITIVE).ln();
        for (c, g) in grad.iter_mut().enumerate() {
            let r = p[c] - if c == t { 1.0 } else { 0.0 };
            g[0] += r;
            for (gj, xj) in g[1..].iter_mut().zip(row) {
                *gj += r * xj;
            }
        }
    }
    loss /= n;
    for (g, wc) in grad.iter_mut().zip(w) {
        for gj in g.iter_mut() {
            *gj /= n;
        }
        for (gj, wj) in g[1..].iter_mut().zip(&wc[1..]) {
            *gj += l2 * wj;
        }
        loss += 0.5 * l2 * wc[1..].iter().map(|v| v * v).sum::<f64>();
    }
    (loss, grad)
}

impl Learner for LogisticLearner {
    fn name(&self) -> String {
        "logistic".into()
    }

    fn params(&self) -> serde_json::Value {
        json!({ "kind": "logistic", "learning_rate": self.learning_rate, "epochs": self.epochs, "l2": self.l2 })
    }

    fn fit(&self, x: &EncodedMatrix, y: &[usize], n_classes: usize, _seed: u64) -> Result<Box<dyn FittedModel>> {
        check_training(x, y, n_classes)?;
        let mut w = vec![vec![0.0; x.n_cols() + 1]; n_classes];
        for _ in 0..self.epochs {
            let (_, g) = loss_and_gradient(&w, x, y, self.l2);
            for (wc, gc) in w.iter_mut().zip(&g) {
                for (a, b) in wc.iter_mut().zip(gc) {
                    *a -= self.learning_rate * b;
                }
            }
        }
        Ok(Box::new(LogisticModel { weights: w }))
    }
}

impl FittedModel for LogisticModel {
    fn n_classes(&self) -> usize {
        self.weights.len()
    }

    fn predict_proba(&self, x: &EncodedMatrix) -> Result<Vec<Vec<f64>>> {
        let d = self.weights[0].len() - 1;
        if x.n_cols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.n_cols() });
        }
        Ok(x.rows().map(|r| softmax_row(&self.weights, r)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy() -> (EncodedMatrix, Vec<usize>) {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 20.0, ((i * 7) % 5) as f64 / 5.0]).collect();
        let y = (0..20).map(|i| usize::from(i >= 10)).collect();
        (EncodedMatrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn probabilities_sum_to_one() {
        let (x, y) = toy();
        for learner in [&KnnLearner { k: 3 } as &dyn Learner, &LogisticLearner::default()] {
            let m = learner.fit(&x, &y, 2, 0).unwrap();
            for p in m.predict_proba(&x).unwrap() {
                assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_class_rejected() {
        let (x, _) = toy();
        assert!(matches!(KnnLearner::default().fit(&x, &[0; 20], 2, 0), Err(Error::SingleClassTraining)));
        assert!(matches!(LogisticLearner::default().fit(&x, &[1; 20], 2, 0), Err(Error::SingleClassTraining)));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::seed::rng(17);
        for _ in 0..5 {
            let (n, d, k) = (12, 3, 3);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
            let x = EncodedMatrix::from_rows(&rows).unwrap();
            let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let w: Vec<Vec<f64>> = (0..k).map(|_| (0..=d).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
            let (_, g) = loss_and_gradient(&w, &x, &y, 0.01);
            let h = 1e-6;
            for c in 0..k {
                for j in 0..=d {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[c][j] += h;
                    wm[c][j] -= h;
                    let fd =
                        (loss_and_gradient(&wp, &x, &y, 0.01).0 - loss_and_gradient(&wm, &x, &y, 0.01).0) / (2.0 * h);
                    let rel = (fd - g[c][j]).abs() / g[c][j].abs().max(1e-8);
                    assert!(rel < 1e-6 || (fd - g[c][j]).abs() < 1e-10, "c={c} j={j} fd={fd} g={}", g[c][j]);
                }
            }
        }
    }

    #[test]
    fn knn_separates_threshold_data() {
        let (x, y) = toy();
        let m = KnnLearner { k: 1 }.fit(&x, &y, 2, 0).unwrap();
        let p = m.predict_proba(&x).unwrap();
        assert!(p.iter().zip(&y).all(|(row, &t)| row[t] == 1.0));
    }
}

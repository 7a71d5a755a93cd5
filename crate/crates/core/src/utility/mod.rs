//! Train-on-synthetic / train-on-real evaluation, permutation importance
//! and rank-biased overlap.

mod learners;
mod metrics;
mod rbo;

use std::collections::BTreeSet;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use learners::{loss_and_gradient, FittedModel, KnnLearner, Learner, LogisticLearner, LogisticModel};
pub use metrics::{
    accuracy, argmax, balanced_accuracy, log_loss, roc_auc, roc_auc_multiclass, weighted_f1, Metric, MetricSet,
    LOG_LOSS_EPS,
};
pub use rbo::{rbo, RboScore, DEFAULT_RBO_P};

use crate::encoder::{EncodedMatrix, HeomEncoder, Weighting};
use crate::error::{Error, Result};
use crate::seed;
use crate::tabular::{ColumnData, ColumnKind, ColumnRole, Table, TableSchema};

pub const DEFAULT_PFI_PERMUTATIONS: usize = 5;
const LEARNER_STREAM: u64 = 20;
const PFI_STREAM: u64 = 21;

/// The two built-in learners with default settings.
pub fn default_learners() -> Vec<Box<dyn Learner>> {
    vec![Box::new(KnnLearner::default()), Box::new(LogisticLearner::default())]
}

/// Name of the schema's target column, if exactly one is marked.
pub fn schema_target(schema: &TableSchema) -> Result<String> {
    let mut targets = schema.names_with_role(ColumnRole::Target);
    match targets.len() {
        1 => Ok(targets.remove(0)),
        0 => Err(Error::MissingTarget("no column has role = \"target\"".into())),
        _ => Err(Error::MissingTarget(format!("several target columns: {}", targets.join(", ")))),
    }
}

/// Feature encoding and class labelling shared by every model of one run.
#[derive(Debug, Clone)]
pub struct Task {
    target: String,
    features: Vec<String>,
    classes: Vec<String>,
    encoder: HeomEncoder,
}

impl Task {
    /// Fits the feature encoder on `reference` (unweighted HEOM over every
    /// non-target column); classes are the sorted union over `tables`.
    pub fn new(reference: &Table, target: &str, tables: &[&Table]) -> Result<Self> {
        let spec = reference.schema().column(target).ok_or_else(|| Error::MissingTarget(target.to_string()))?;
        if spec.kind != ColumnKind::Categorical {
            return Err(Error::ColumnKindMismatch { column: target.to_string(), expected: "categorical" });
        }
        let features: Vec<String> =
            reference.schema().columns().iter().filter(|c| c.name != target).map(|c| c.name.clone()).collect();
        if features.is_empty() {
            return Err(Error::InvalidSchema("no feature columns besides the target".into()));
        }
        let names: Vec<&str> = features.iter().map(String::as_str).collect();
        let encoder = HeomEncoder::fit(&reference.select(&names)?, Weighting::Unweighted)?;
        let mut classes = BTreeSet::new();
        for t in std::iter::once(reference).chain(tables.iter().copied()) {
            classes.extend(
                t.categorical(target)
                    .map_err(|_| Error::MissingTarget(target.to_string()))?
                    .labels()
                    .map(str::to_string),
            );
        }
        Ok(Task { target: target.to_string(), features, classes: classes.into_iter().collect(), encoder })
    }

    pub fn target(&self) -> &str {
        &self.target
    }

    pub fn features(&self) -> &[String] {
        &self.features
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn encoder(&self) -> &HeomEncoder {
        &self.encoder
    }

    pub fn encode(&self, t: &Table) -> Result<EncodedMatrix> {
        self.encoder.encode(t)
    }

    pub fn labels(&self, t: &Table) -> Result<Vec<usize>> {
        let col = t.categorical(&self.target).map_err(|_| Error::MissingTarget(self.target.clone()))?;
        col.labels()
            .map(|l| {
                self.classes
                    .binary_search_by(|c| c.as_str().cmp(l))
                    .map_err(|_| Error::InvalidParameter(format!("unknown class {l:?}")))
            })
            .collect()
    }

    pub fn train(&self, learner: &dyn Learner, data: &Table, seed: u64) -> Result<TrainedModel> {
        let model = learner.fit(&self.encode(data)?, &self.labels(data)?, self.classes.len(), seed)?;
        Ok(TrainedModel { task: self.clone(), model })
    }
}

/// A fitted model together with the task that produced its inputs.
pub struct TrainedModel {
    task: Task,
    model: Box<dyn FittedModel>,
}

impl TrainedModel {
    pub fn from_parts(task: Task, model: Box<dyn FittedModel>) -> Self {
        TrainedModel { task, model }
    }

    pub fn task(&self) -> &Task {
        &self.task
    }

    pub fn predict_proba(&self, t: &Table) -> Result<Vec<Vec<f64>>> {
        self.model.predict_proba(&self.task.encode(t)?)
    }

    pub fn evaluate(&self, t: &Table) -> Result<MetricSet> {
        if t.is_empty() {
            return Err(Error::EmptyTable);
        }
        Ok(MetricSet::compute(&self.task.labels(t)?, &self.predict_proba(t)?, self.task.classes.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerScores {
    pub learner: String,
    pub params: serde_json::Value,
    pub trtr: MetricSet,
    pub tstr: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityScores {
    pub target: String,
    pub classes: Vec<String>,
    pub learners: Vec<LearnerScores>,
    /// Cross-learner means; `None` when any learner lacks the metric.
    pub mean_trtr: IndexMap<String, Option<f64>>,
    pub mean_tstr: IndexMap<String, Option<f64>>,
    /// `|mean_trtr − mean_tstr|` per metric.
    pub gaps: IndexMap<String, Option<f64>>,
}

impl UtilityScores {
    pub fn gap(&self, m: Metric) -> Option<f64> {
        self.gaps.get(m.name()).copied().flatten()
    }
}

fn cross_mean(sets: &[&MetricSet], m: Metric) -> Option<f64> {
    let vals: Option<Vec<f64>> = sets.iter().map(|s| s.get(m)).collect();
    vals.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Trains every learner on `real_train` and on `synth_train` and scores both
/// on `real_test`. Learner `i` uses the same seed under both protocols.
pub fn tstr_trtr(
    real_train: &Table,
    real_test: &Table,
    synth_train: &Table,
    learners: &[Box<dyn Learner>],
    target: &str,
    seed: u64,
) -> Result<UtilityScores> {
    if real_test.is_empty() {
        return Err(Error::EmptyTable);
    }
    if learners.is_empty() {
        return Err(Error::EmptySet("learners"));
    }
    for t in [real_test, synth_train] {
        if !t.schema().same_shape(real_train.schema()) {
            return Err(Error::SchemaMismatch("utility tables must share one schema".into()));
        }
    }
    let task = Task::new(real_train, target, &[real_test, synth_train])?;
    let cells: Vec<(usize, bool)> = (0..learners.len()).flat_map(|i| [(i, false), (i, true)]).collect();
    let results: Vec<MetricSet> = cells
        .par_iter()
        .map(|&(i, synthetic)| {
            let train = if synthetic { synth_train } else { real_train };
            task.train(learners[i].as_ref(), train, seed::derive(seed, LEARNER_STREAM, i as u64))?.evaluate(real_test)
        })
        .collect::<Result<_>>()?;
    let per_learner: Vec<LearnerScores> = learners
        .iter()
        .enumerate()
        .map(|(i, l)| LearnerScores {
            learner: l.name(),
            params: l.params(),
            trtr: results[2 * i],
            tstr: results[2 * i + 1],
        })
        .collect();
    let trtr: Vec<&MetricSet> = per_learner.iter().map(|s| &s.trtr).collect();
    let tstr: Vec<&MetricSet> = per_learner.iter().map(|s| &s.tstr).collect();
    let mut mean_trtr = IndexMap::new();
    let mut mean_tstr = IndexMap::new();
    let mut gaps = IndexMap::new();
    for m in Metric::ALL {
        let (a, b) = (cross_mean(&trtr, m), cross_mean(&tstr, m));
        mean_trtr.insert(m.name().to_string(), a);
        mean_tstr.insert(m.name().to_string(), b);
        gaps.insert(m.name().to_string(), a.zip(b).map(|(a, b)| (a - b).abs()));
    }
    Ok(UtilityScores {
        target: target.to_string(),
        classes: task.classes.clone(),
        learners: per_learner,
        mean_trtr,
        mean_tstr,
        gaps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub metric: Metric,
    pub permutations: usize,
    /// Mean metric degradation per feature, in feature order.
    pub scores: IndexMap<String, f64>,
    /// Features by descending score, ties by feature order.
    pub ranking: Vec<String>,
}

fn score(model: &TrainedModel, t: &Table, metric: Metric) -> Result<f64> {
    model.evaluate(t)?.get(metric).ok_or(Error::OneClassOnly)
}

fn non_identity_permutation(n: usize, rng: &mut seed::Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    loop {
        p.shuffle(rng);
        if n < 2 || p.iter().enumerate().any(|(i, &v)| i != v) {
            return p;
        }
    }
}

/// Permutation feature importance. The score of feature `j` is the mean over
/// `permutations` shuffles of column `j` of the metric degradation, signed so
/// that a larger value always means the model relied more on `j`.
pub fn permutation_importance(
    model: &TrainedModel,
    test: &Table,
    metric: Metric,
    permutations: usize,
    seed: u64,
) -> Result<ImportanceRanking> {
    if permutations == 0 {
        return Err(Error::InvalidParameter("permutations must be >= 1".into()));
    }
    let base = score(model, test, metric)?;
    let sign = if metric.higher_is_better() { 1.0 } else { -1.0 };
    let features = model.task.features();
    let scores: Vec<f64> = features
        .par_iter()
        .enumerate()
        .map(|(j, name)| {
            let mut rng = seed::rng(seed::derive(seed, PFI_STREAM, j as u64));
            let column = test.column(name)?;
            let mut total = 0.0;
            for _ in 0..permutations {
                let perm = non_identity_permutation(test.n_rows(), &mut rng);
                let shuffled: ColumnData = column.take(&perm);
                total += sign * (base - score(model, &test.with_column(name, shuffled)?, metric)?);
            }
            Ok(total / permutations as f64)
        })
        .collect::<Result<_>>()?;
    let mut order: Vec<usize> = (0..features.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(ImportanceRanking {
        metric,
        permutations,
        scores: features.iter().cloned().zip(scores).collect(),
        ranking: order.into_iter().map(|i| features[i].clone()).collect(),
    })
}

/// PFI rankings of one learner trained on real and on synthetic rows, and
/// their rank-biased overlap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceAgreement {
    pub learner: String,
    pub real: ImportanceRanking,
    pub synthetic: ImportanceRanking,
    pub p: f64,
    pub rbo: RboScore,
}

#[allow(clippy::too_many_arguments)]
pub fn importance_agreement(
    real_train: &Table,
    real_test: &Table,
    synth_train: &Table,
    learner: &dyn Learner,
    target: &str,
    metric: Metric,
    permutations: usize,
    p: f64,
    seed: u64,
) -> Result<ImportanceAgreement> {
    let task = Task::new(real_train, target, &[real_test, synth_train])?;
    let fit_seed = seed::derive(seed, LEARNER_STREAM, 0);
    let on_real = task.train(learner, real_train, fit_seed)?;
    let on_synth = task.train(learner, synth_train, fit_seed)?;
    let real = permutation_importance(&on_real, real_test, metric, permutations, seed)?;
    let synthetic = permutation_importance(&on_synth, real_test, metric, permutations, seed)?;
    let rbo = rbo(&real.ranking, &synthetic.ranking, p)?;
    Ok(ImportanceAgreement { learner: learner.name(), real, synthetic, p, rbo })
}

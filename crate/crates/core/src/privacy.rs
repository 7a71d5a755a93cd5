//! Privacy proxies: distance to closest record, correct attribution
//! probability, attribute inference and distinct L-diversity.

use std::collections::{HashMap, HashSet};

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncodedMatrix, HeomEncoder, Weighting};
use crate::error::{Error, Result};
use crate::neighbors;
use crate::stats;
use crate::tabular::{format_f64, ColumnData, ColumnKind, Table};
use crate::utility::{KnnLearner, Learner};

/// Diagonal jitter added to the normal equations.
pub const OLS_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcrReport {
    #[serde(skip)]
    pub dcr_train: Vec<f64>,
    #[serde(skip)]
    pub dcr_test: Vec<f64>,
    pub sum_train: f64,
    pub sum_test: f64,
    pub median_train: f64,
    pub median_test: f64,
    /// `100 · Σtrain / (Σtrain + Σtest)`; 50 when both sums vanish.
    pub rpr: f64,
    /// `100 − rpr`.
    pub proximity_share: f64,
    /// `rpr − reference rpr` in percentage points, once a reference is set.
    pub delta_rpr: Option<f64>,
}

impl DcrReport {
    pub fn with_reference(mut self, reference_rpr: f64) -> Self {
        self.delta_rpr = Some(self.rpr - reference_rpr);
        self
    }
}

/// Relative proximity ratio of two DCR sums, in percent.
pub fn rpr(sum_train: f64, sum_test: f64) -> f64 {
    let total = sum_train + sum_test;
    if total == 0.0 {
        50.0
    } else {
        100.0 * sum_train / total
    }
}

pub fn dcr_rpr(enc: &HeomEncoder, real_train: &Table, real_test: &Table, synth: &Table) -> Result<DcrReport> {
    for (t, what) in [(real_train, "real_train"), (real_test, "real_test"), (synth, "synthetic")] {
        if t.is_empty() {
            return Err(Error::EmptySet(what));
        }
    }
    let x_s = enc.encode(synth)?;
    let dcr_train = neighbors::dcr(&enc.encode(real_train)?, &x_s)?;
    let dcr_test = neighbors::dcr(&enc.encode(real_test)?, &x_s)?;
    let sum_train: f64 = dcr_train.iter().sum();
    let sum_test: f64 = dcr_test.iter().sum();
    let r = rpr(sum_train, sum_test);
    Ok(DcrReport {
        median_train: stats::median(&dcr_train),
        median_test: stats::median(&dcr_test),
        dcr_train,
        dcr_test,
        sum_train,
        sum_test,
        rpr: r,
        proximity_share: 100.0 - r,
        delta_rpr: None,
    })
}

fn require_categorical(t: &Table, name: &str) -> Result<()> {
    match t.column(name)?.kind() {
        ColumnKind::Categorical => Ok(()),
        ColumnKind::Numeric => Err(Error::NonCategoricalSensitive(name.to_string())),
    }
}

/// Row keys over `columns`: labels for categoricals, shortest round-trip
/// text for numerics.
fn row_keys(t: &Table, columns: &[String]) -> Result<Vec<Vec<String>>> {
    let cols: Vec<&ColumnData> = columns.iter().map(|c| t.column(c)).collect::<Result<_>>()?;
    Ok((0..t.n_rows())
        .map(|i| {
            cols.iter()
                .map(|c| match c {
                    ColumnData::Numeric(v) => format_f64(v[i]),
                    ColumnData::Categorical(c) => c.label(i).to_string(),
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapEntry {
    pub cap: f64,
    pub protection: f64,
    pub records: usize,
    /// Real records whose key has no synthetic match (scored `p_i = 0`).
    pub unmatched: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapReport {
    pub quasi_identifiers: Vec<String>,
    pub attributes: IndexMap<String, CapEntry>,
    pub median_protection: Option<f64>,
}

/// Correct attribution probability of one sensitive column. Keys are exact
/// matches on categorical quasi-identifiers.
pub fn cap(real: &Table, synth: &Table, quasi_ids: &[String], sensitive: &str) -> Result<CapEntry> {
    require_categorical(real, sensitive)?;
    require_categorical(synth, sensitive)?;
    for q in quasi_ids {
        for t in [real, synth] {
            if t.column(q)?.kind() != ColumnKind::Categorical {
                return Err(Error::ColumnKindMismatch { column: q.clone(), expected: "categorical" });
            }
        }
    }
    if real.is_empty() {
        return Err(Error::EmptySet("real records"));
    }
    let s_keys = row_keys(synth, quasi_ids)?;
    let s_sens = synth.categorical(sensitive)?;
    let mut classes: HashMap<&[String], (usize, HashMap<&str, usize>)> = HashMap::new();
    for (i, k) in s_keys.iter().enumerate() {
        let e = classes.entry(k.as_slice()).or_default();
        e.0 += 1;
        *e.1.entry(s_sens.label(i)).or_default() += 1;
    }
    let r_keys = row_keys(real, quasi_ids)?;
    let r_sens = real.categorical(sensitive)?;
    let mut total = 0.0;
    let mut unmatched = 0;
    for (i, k) in r_keys.iter().enumerate() {
        match classes.get(k.as_slice()) {
            Some((n, counts)) => total += counts.get(r_sens.label(i)).copied().unwrap_or(0) as f64 / *n as f64,
            None => unmatched += 1,
        }
    }
    let cap = total / real.n_rows() as f64;
    Ok(CapEntry { cap, protection: 1.0 - cap, records: real.n_rows(), unmatched })
}

pub fn cap_report(real: &Table, synth: &Table, quasi_ids: &[String], sensitive: &[String]) -> Result<CapReport> {
    let attributes: IndexMap<String, CapEntry> = sensitive
        .par_iter()
        .map(|s| Ok((s.clone(), cap(real, synth, quasi_ids, s)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();
    let prot: Vec<f64> = attributes.values().map(|e| e.protection).collect();
    Ok(CapReport {
        quasi_identifiers: quasi_ids.to_vec(),
        median_protection: (!prot.is_empty()).then(|| stats::median(&prot)),
        attributes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainedOn {
    Real,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiaEntry {
    pub target: String,
    pub kind: AttackKind,
    pub trained_on: TrainedOn,
    pub attacker: String,
    /// Top-1 accuracy or R².
    pub score: f64,
    pub rmse: Option<f64>,
    /// The attacker's training target held a single level.
    pub degenerate: bool,
}

impl AiaEntry {
    pub fn trained_on(mut self, who: TrainedOn) -> Self {
        self.trained_on = who;
        self
    }
}

fn qi_encoder(train: &Table, quasi_ids: &[String]) -> Result<HeomEncoder> {
    if quasi_ids.is_empty() {
        return Err(Error::InvalidParameter("attribute inference needs at least one quasi-identifier".into()));
    }
    let names: Vec<&str> = quasi_ids.iter().map(String::as_str).collect();
    HeomEncoder::fit(&train.select(&names)?, Weighting::Unweighted)
}

fn missing_target(t: &Table, target: &str) -> Error {
    match t.column(target) {
        Ok(_) => Error::ColumnKindMismatch { column: target.to_string(), expected: "categorical" },
        Err(_) => Error::MissingTarget(target.to_string()),
    }
}

/// Attacker trained on `synth` (encoded quasi-identifiers → `target`) and
/// scored by top-1 accuracy on `real_eval`. Defaults to 1-NN.
pub fn aia_classification(
    synth: &Table,
    real_eval: &Table,
    quasi_ids: &[String],
    target: &str,
    attacker: Option<&dyn Learner>,
) -> Result<AiaEntry> {
    let default = KnnLearner { k: 1 };
    let attacker = attacker.unwrap_or(&default);
    let ys = synth.categorical(target).map_err(|_| missing_target(synth, target))?;
    let ye = real_eval.categorical(target).map_err(|_| missing_target(real_eval, target))?;
    if real_eval.is_empty() {
        return Err(Error::EmptySet("evaluation records"));
    }
    let mut classes: Vec<&str> = ys.labels().chain(ye.labels()).collect::<HashSet<_>>().into_iter().collect();
    classes.sort_unstable();
    let code = |l: &str| classes.binary_search(&l).expect("label collected above");
    let y_train: Vec<usize> = ys.labels().map(code).collect();
    let y_eval: Vec<usize> = ye.labels().map(code).collect();
    let degenerate = y_train.iter().all(|&c| c == y_train[0]);
    let pred: Vec<usize> = if degenerate {
        vec![y_train[0]; y_eval.len()]
    } else {
        let enc = qi_encoder(synth, quasi_ids)?;
        let model = attacker.fit(&enc.encode(synth)?, &y_train, classes.len(), 0)?;
        model.predict_proba(&enc.encode(real_eval)?)?.iter().map(|p| crate::utility::argmax(p)).collect()
    };
    Ok(AiaEntry {
        target: target.to_string(),
        kind: AttackKind::Classification,
        trained_on: TrainedOn::Synthetic,
        attacker: attacker.name(),
        score: crate::utility::accuracy(&y_eval, &pred),
        rmse: None,
        degenerate,
    })
}

fn design(x: &EncodedMatrix) -> DMatrix<f64> {
    DMatrix::from_fn(x.n_rows(), x.n_cols() + 1, |i, j| if j == 0 { 1.0 } else { x.row(i)[j - 1] })
}

/// Least-squares attacker on encoded quasi-identifiers; R² and RMSE on
/// `real_eval` share one residual sum.
pub fn aia_regression(synth: &Table, real_eval: &Table, quasi_ids: &[String], target: &str) -> Result<AiaEntry> {
    let numeric = |t: &Table| -> Result<Vec<f64>> {
        match t.column(target) {
            Ok(ColumnData::Numeric(v)) => Ok(v.clone()),
            Ok(_) => Err(Error::ColumnKindMismatch { column: target.to_string(), expected: "numeric" }),
            Err(_) => Err(Error::MissingTarget(target.to_string())),
        }
    };
    let (ys, ye) = (numeric(synth)?, numeric(real_eval)?);
    if synth.is_empty() || real_eval.is_empty() {
        return Err(Error::EmptySet("regression rows"));
    }
    let enc = qi_encoder(synth, quasi_ids)?;
    let xs = design(&enc.encode(synth)?);
    let xtx = xs.transpose() * &xs + DMatrix::identity(xs.ncols(), xs.ncols()) * OLS_RIDGE;
    let xty = xs.transpose() * DVector::from_vec(ys);
    let beta = match xtx.clone().cholesky() {
        Some(ch) => ch.solve(&xty),
        None => xtx.lu().solve(&xty).ok_or_else(|| Error::InvalidParameter("singular normal equations".into()))?,
    };
    let pred = design(&enc.encode(real_eval)?) * beta;
    let mean = stats::mean(&ye);
    let sst: f64 = ye.iter().map(|y| (y - mean).powi(2)).sum();
    if sst == 0.0 {
        return Err(Error::ZeroVarianceTarget);
    }
    let sse: f64 = ye.iter().zip(pred.iter()).map(|(y, p)| (y - p).powi(2)).sum();
    Ok(AiaEntry {
        target: target.to_string(),
        kind: AttackKind::Regression,
        trained_on: TrainedOn::Synthetic,
        attacker: "ols".into(),
        score: 1.0 - sse / sst,
        rmse: Some((sse / ye.len() as f64).sqrt()),
        degenerate: false,
    })
}

/// Classification for categorical targets, regression for numeric ones.
pub fn aia(synth: &Table, real_eval: &Table, quasi_ids: &[String], target: &str) -> Result<AiaEntry> {
    match real_eval.column(target).map_err(|_| Error::MissingTarget(target.to_string()))?.kind() {
        ColumnKind::Categorical => aia_classification(synth, real_eval, quasi_ids, target, None),
        ColumnKind::Numeric => aia_regression(synth, real_eval, quasi_ids, target),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LDiversity {
    pub groups: usize,
    pub min: usize,
    pub mean: f64,
}

/// Distinct sensitive levels per exact quasi-identifier class.
pub fn l_diversity(table: &Table, quasi_ids: &[String], sensitive: &str) -> Result<LDiversity> {
    require_categorical(table, sensitive)?;
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    let keys = row_keys(table, quasi_ids)?;
    let sens = table.categorical(sensitive)?.codes();
    let mut groups: HashMap<&[String], HashSet<u32>> = HashMap::new();
    for (k, &s) in keys.iter().zip(sens) {
        groups.entry(k.as_slice()).or_default().insert(s);
    }
    let counts: Vec<usize> = groups.values().map(HashSet::len).collect();
    Ok(LDiversity {
        groups: counts.len(),
        min: counts.iter().copied().min().unwrap_or(0),
        mean: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LDiversityPair {
    pub real: LDiversity,
    pub synthetic: LDiversity,
}

pub fn l_diversity_report(
    real: &Table,
    synth: &Table,
    quasi_ids: &[String],
    sensitive: &[String],
) -> Result<IndexMap<String, LDiversityPair>> {
    sensitive
        .iter()
        .map(|s| {
            Ok((
                s.clone(),
                LDiversityPair { real: l_diversity(real, quasi_ids, s)?, synthetic: l_diversity(synth, quasi_ids, s)? },
            ))
        })
        .collect()
}

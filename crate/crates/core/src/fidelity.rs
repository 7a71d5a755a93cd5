//! Univariate and bivariate resemblance between a real and a synthetic table.
//!
//! Categorical marginals are compared with the base-2 Jensen–Shannon
//! divergence (and its square root, a metric in `[0, 1]`), broken down per
//! level together with log2 fold-changes. Numeric marginals get Cohen's d,
//! relative quantile shifts and tail-mass deltas. Dependence structure is
//! summarised by Pearson, Cramér's V and η² matrices, compared through the
//! Frobenius norm of their difference and the Spearman correlation of their
//! entries.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::tabular::{crosstab, CategoricalColumn, ColumnData, ColumnKind, Table};

pub const DEFAULT_Q_LOW: f64 = 0.05;
pub const DEFAULT_Q_HIGH: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelComparison {
    pub p_real: f64,
    pub p_synth: f64,
    /// `log2(p_synth / p_real)`; absent when the level never occurs in real data.
    pub log2fc: Option<f64>,
    pub js_contrib: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalComparison {
    /// Keyed by label over the union support, real labels first.
    pub levels: IndexMap<String, LevelComparison>,
    pub js_divergence_bits: f64,
    pub js_distance: f64,
}

fn xlog2_ratio(p: f64, m: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / m).log2()
    }
}

fn as_categorical<'a>(c: &'a ColumnData, name: &str) -> Result<&'a CategoricalColumn> {
    match c {
        ColumnData::Categorical(c) => Ok(c),
        _ => Err(Error::ColumnKindMismatch { column: name.into(), expected: "categorical" }),
    }
}

fn as_numeric<'a>(c: &'a ColumnData, name: &str) -> Result<&'a [f64]> {
    match c {
        ColumnData::Numeric(v) => Ok(v),
        _ => Err(Error::ColumnKindMismatch { column: name.into(), expected: "numeric" }),
    }
}

/// Jensen–Shannon comparison of two categorical columns aligned by label.
pub fn js_categorical(real: &ColumnData, synth: &ColumnData) -> Result<CategoricalComparison> {
    let r = as_categorical(real, "real")?;
    let s = as_categorical(synth, "synthetic")?;
    if r.is_empty() || s.is_empty() {
        return Err(Error::EmptySet("categorical column"));
    }
    let (nr, ns) = (r.len() as f64, s.len() as f64);
    let mut levels = IndexMap::new();
    let mut total = 0.0;
    for (label, (cr, cs)) in crosstab(r, s) {
        let (pr, ps) = (cr as f64 / nr, cs as f64 / ns);
        let m = 0.5 * (pr + ps);
        let contrib = 0.5 * xlog2_ratio(pr, m) + 0.5 * xlog2_ratio(ps, m);
        total += contrib;
        // a dropped level is −∞, rendered as null in JSON
        let log2fc = (pr > 0.0).then(|| if ps > 0.0 { (ps / pr).log2() } else { f64::NEG_INFINITY });
        levels.insert(label, LevelComparison { p_real: pr, p_synth: ps, log2fc, js_contrib: contrib });
    }
    let js_divergence_bits = total.max(0.0);
    Ok(CategoricalComparison { levels, js_divergence_bits, js_distance: js_divergence_bits.min(1.0).sqrt() })
}

/// Per-column JS comparisons over every categorical column of `real`.
pub fn categorical_comparisons(real: &Table, synth: &Table) -> Result<IndexMap<String, CategoricalComparison>> {
    let mut out = IndexMap::new();
    for spec in real.schema().columns().iter().filter(|c| c.kind == ColumnKind::Categorical) {
        let s = synth.column(&spec.name)?;
        let cmp = js_categorical(real.column(&spec.name)?, s)
            .map_err(|_| Error::ColumnKindMismatch { column: spec.name.clone(), expected: "categorical" })?;
        out.insert(spec.name.clone(), cmp);
    }
    Ok(out)
}

/// Sum over categorical columns of the per-column divergence, in bits.
pub fn total_categorical_js(real: &Table, synth: &Table) -> Result<f64> {
    Ok(categorical_comparisons(real, synth)?.values().map(|c| c.js_divergence_bits).sum())
}

/// Mean per-column JS distance; `None` without categorical columns.
pub fn mean_js_distance(real: &Table, synth: &Table) -> Result<Option<f64>> {
    let cmp = categorical_comparisons(real, synth)?;
    if cmp.is_empty() {
        return Ok(None);
    }
    Ok(Some(cmp.values().map(|c| c.js_distance).sum::<f64>() / cmp.len() as f64))
}

/// `|μ_S − μ_R| / s_p` with the pooled `(n − 1)` standard deviation.
pub fn cohens_d(real: &[f64], synth: &[f64]) -> Result<f64> {
    for side in [real, synth] {
        if side.len() < 2 {
            return Err(Error::TooFewRows { needed: 2, got: side.len() });
        }
    }
    let (nr, ns) = (real.len() as f64, synth.len() as f64);
    let pooled =
        ((nr - 1.0) * stats::sample_variance(real) + (ns - 1.0) * stats::sample_variance(synth)) / (nr + ns - 2.0);
    let diff = (stats::mean(synth) - stats::mean(real)).abs();
    if pooled == 0.0 {
        return if diff == 0.0 { Ok(0.0) } else { Err(Error::ZeroPooledStd) };
    }
    Ok(diff / pooled.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileHeuristics {
    pub q_low: f64,
    pub q_high: f64,
    /// Baseline `(Q_L, Q_50, Q_H)`.
    pub baseline: [f64; 3],
    pub variant: [f64; 3],
    /// `Q^V/Q^B − 1`; absent when the baseline quantile is zero.
    pub shift_low: Option<f64>,
    pub shift_med: Option<f64>,
    pub shift_high: Option<f64>,
    /// Percentage points, at baseline thresholds.
    pub dp_low: f64,
    pub dp_high: f64,
}

fn rel_shift(v: f64, b: f64) -> Option<f64> {
    (b != 0.0).then(|| v / b - 1.0)
}

fn share(xs: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    xs.iter().filter(|&&x| pred(x)).count() as f64 / xs.len() as f64
}

pub fn quantile_heuristics(baseline: &[f64], variant: &[f64], q_low: f64, q_high: f64) -> Result<QuantileHeuristics> {
    if baseline.is_empty() || variant.is_empty() {
        return Err(Error::EmptySet("numeric column"));
    }
    if !(0.0..=1.0).contains(&q_low) || !(0.0..=1.0).contains(&q_high) || q_low >= q_high {
        return Err(Error::InvalidParameter(format!(
            "quantile bounds ({q_low}, {q_high}) must satisfy 0 <= q_L < q_H <= 1"
        )));
    }
    let (b, v) = (stats::sorted(baseline), stats::sorted(variant));
    let qb = [stats::quantile_sorted(&b, q_low), stats::quantile_sorted(&b, 0.5), stats::quantile_sorted(&b, q_high)];
    let qv = [stats::quantile_sorted(&v, q_low), stats::quantile_sorted(&v, 0.5), stats::quantile_sorted(&v, q_high)];
    let (lo, hi) = (qb[0], qb[2]);
    Ok(QuantileHeuristics {
        q_low,
        q_high,
        baseline: qb,
        variant: qv,
        shift_low: rel_shift(qv[0], qb[0]),
        shift_med: rel_shift(qv[1], qb[1]),
        shift_high: rel_shift(qv[2], qb[2]),
        dp_low: 100.0 * (share(variant, |x| x <= lo) - share(baseline, |x| x <= lo)),
        dp_high: 100.0 * (share(variant, |x| x >= hi) - share(baseline, |x| x >= hi)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericColumnComparison {
    /// `None` when both columns are constant with different means.
    pub cohens_d_abs: Option<f64>,
    pub quantiles: QuantileHeuristics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericComparison {
    pub columns: IndexMap<String, NumericColumnComparison>,
    pub median_abs_shift_low: Option<f64>,
    pub median_abs_shift_med: Option<f64>,
    pub median_abs_shift_high: Option<f64>,
    pub mean_abs_dp_low: Option<f64>,
    pub mean_abs_dp_high: Option<f64>,
    pub mean_cohens_d: Option<f64>,
}

fn median_abs(xs: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.flatten().map(f64::abs).collect();
    (!v.is_empty()).then(|| stats::median(&v))
}

fn mean_of(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = xs.collect();
    (!v.is_empty()).then(|| stats::mean(&v))
}

/// Numeric comparisons with `real` as the baseline.
pub fn numeric_comparisons(real: &Table, synth: &Table, q_low: f64, q_high: f64) -> Result<NumericComparison> {
    let mut columns = IndexMap::new();
    for spec in real.schema().columns().iter().filter(|c| c.kind == ColumnKind::Numeric) {
        let r = real.numeric(&spec.name)?;
        let s = as_numeric(synth.column(&spec.name)?, &spec.name)?;
        let d = match cohens_d(r, s) {
            Ok(d) => Some(d),
            Err(Error::ZeroPooledStd) => None,
            Err(e) => return Err(e),
        };
        columns.insert(
            spec.name.clone(),
            NumericColumnComparison { cohens_d_abs: d, quantiles: quantile_heuristics(r, s, q_low, q_high)? },
        );
    }
    let q = || columns.values().map(|c| &c.quantiles);
    Ok(NumericComparison {
        median_abs_shift_low: median_abs(q().map(|h| h.shift_low)),
        median_abs_shift_med: median_abs(q().map(|h| h.shift_med)),
        median_abs_shift_high: median_abs(q().map(|h| h.shift_high)),
        mean_abs_dp_low: mean_of(q().map(|h| h.dp_low.abs())),
        mean_abs_dp_high: mean_of(q().map(|h| h.dp_high.abs())),
        mean_cohens_d: mean_of(columns.values().filter_map(|c| c.cohens_d_abs)),
        columns,
    })
}

/// Cramér's V from the contingency table of two categorical columns, no
/// bias correction. `None` when either column has a single observed level.
pub fn cramers_v(a: &CategoricalColumn, b: &CategoricalColumn) -> Option<f64> {
    let (ra, rb) = (a.levels().len(), b.levels().len());
    let mut table = vec![0usize; ra * rb];
    for (&x, &y) in a.codes().iter().zip(b.codes()) {
        table[x as usize * rb + y as usize] += 1;
    }
    let rows: Vec<usize> = (0..ra).map(|i| table[i * rb..(i + 1) * rb].iter().sum()).collect();
    let cols: Vec<usize> = (0..rb).map(|j| (0..ra).map(|i| table[i * rb + j]).sum()).collect();
    let (r_obs, c_obs) = (rows.iter().filter(|&&c| c > 0).count(), cols.iter().filter(|&&c| c > 0).count());
    let k = r_obs.min(c_obs);
    if k < 2 {
        return None;
    }
    let n = a.len() as f64;
    let mut chi2 = 0.0;
    for i in (0..ra).filter(|&i| rows[i] > 0) {
        for j in (0..rb).filter(|&j| cols[j] > 0) {
            let e = rows[i] as f64 * cols[j] as f64 / n;
            let o = table[i * rb + j] as f64;
            chi2 += (o - e) * (o - e) / e;
        }
    }
    Some((chi2 / (n * (k as f64 - 1.0))).sqrt().clamp(0.0, 1.0))
}

/// `SS_between / SS_total` of `y` grouped by `g`. `None` when `y` is constant.
pub fn correlation_ratio(y: &[f64], g: &CategoricalColumn) -> Option<f64> {
    let grand = stats::mean(y);
    let ss_total: f64 = y.iter().map(|v| (v - grand) * (v - grand)).sum();
    if ss_total == 0.0 {
        return None;
    }
    let mut sums = vec![0.0; g.levels().len()];
    let mut counts = vec![0usize; g.levels().len()];
    for (&v, &c) in y.iter().zip(g.codes()) {
        sums[c as usize] += v;
        counts[c as usize] += 1;
    }
    let ss_between: f64 = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
        .map(|(s, &n)| {
            let m = s / n as f64;
            n as f64 * (m - grand) * (m - grand)
        })
        .sum();
    Some((ss_between / ss_total).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DependenceMatrix {
    fn flat(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegeneratePair {
    pub table: String,
    pub row: String,
    pub col: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub real: DependenceMatrix,
    pub synth: DependenceMatrix,
    pub frobenius_diff: f64,
    /// Over the upper off-diagonal entries (square families) or all entries
    /// (η²); `None` when one side has no rank variance.
    pub spearman: Option<f64>,
    pub degenerate: Vec<DegeneratePair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceSummary {
    pub pearson: Option<FamilySummary>,
    pub cramers_v: Option<FamilySummary>,
    pub eta2: Option<FamilySummary>,
}

fn names_of(t: &Table, kind: ColumnKind) -> Vec<String> {
    t.schema().columns().iter().filter(|c| c.kind == kind).map(|c| c.name.clone()).collect()
}

type PairFn<'a> = dyn Fn(&Table, &str, &str) -> Result<Option<f64>> + 'a;

fn square_matrix(
    t: &Table,
    label: &str,
    names: &[String],
    f: &PairFn<'_>,
    flags: &mut Vec<DegeneratePair>,
) -> Result<DependenceMatrix> {
    let k = names.len();
    let mut values = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let v = f(t, &names[i], &names[j])?.unwrap_or_else(|| {
                flags.push(DegeneratePair { table: label.into(), row: names[i].clone(), col: names[j].clone() });
                0.0
            });
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(DependenceMatrix { rows: names.to_vec(), cols: names.to_vec(), values })
}

fn upper(m: &DependenceMatrix) -> Vec<f64> {
    let k = m.values.len();
    (0..k).flat_map(|i| (i + 1..k).map(move |j| (i, j))).map(|(i, j)| m.values[i][j]).collect()
}

fn frobenius(a: &DependenceMatrix, b: &DependenceMatrix) -> f64 {
    a.flat().zip(b.flat()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn summarize(
    real: DependenceMatrix,
    synth: DependenceMatrix,
    square: bool,
    degenerate: Vec<DegeneratePair>,
) -> FamilySummary {
    let (ra, sa) = if square { (upper(&real), upper(&synth)) } else { (real.flat().collect(), synth.flat().collect()) };
    FamilySummary {
        frobenius_diff: frobenius(&real, &synth),
        spearman: stats::spearman(&ra, &sa),
        real,
        synth,
        degenerate,
    }
}

pub fn dependence_matrices(real: &Table, synth: &Table) -> Result<DependenceSummary> {
    if !real.schema().same_shape(synth.schema()) {
        return Err(Error::SchemaMismatch("dependence matrices need identical schemas".into()));
    }
    let nums = names_of(real, ColumnKind::Numeric);
    let cats = names_of(real, ColumnKind::Categorical);

    let pearson_fn =
        |t: &Table, a: &str, b: &str| -> Result<Option<f64>> { Ok(stats::pearson(t.numeric(a)?, t.numeric(b)?)) };
    let v_fn =
        |t: &Table, a: &str, b: &str| -> Result<Option<f64>> { Ok(cramers_v(t.categorical(a)?, t.categorical(b)?)) };

    let family = |names: &[String], f: &PairFn<'_>| -> Result<Option<FamilySummary>> {
        if names.len() < 2 {
            return Ok(None);
        }
        let mut flags = Vec::new();
        let r = square_matrix(real, "real", names, f, &mut flags)?;
        let s = square_matrix(synth, "synth", names, f, &mut flags)?;
        Ok(Some(summarize(r, s, true, flags)))
    };
    let pearson = family(&nums, &pearson_fn)?;
    let cramers = family(&cats, &v_fn)?;

    let eta2 = if nums.is_empty() || cats.is_empty() {
        None
    } else {
        let mut flags = Vec::new();
        let mut build = |t: &Table, label: &str| -> Result<DependenceMatrix> {
            let mut values = Vec::with_capacity(nums.len());
            for n in &nums {
                let y = t.numeric(n)?;
                let mut row = Vec::with_capacity(cats.len());
                for c in &cats {
                    row.push(correlation_ratio(y, t.categorical(c)?).unwrap_or_else(|| {
                        flags.push(DegeneratePair { table: label.into(), row: n.clone(), col: c.clone() });
                        0.0
                    }));
                }
                values.push(row);
            }
            Ok(DependenceMatrix { rows: nums.clone(), cols: cats.clone(), values })
        };
        let r = build(real, "real")?;
        let s = build(synth, "synth")?;
        Some(summarize(r, s, false, flags))
    };
    Ok(DependenceSummary { pearson, cramers_v: cramers, eta2 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub categorical: IndexMap<String, CategoricalComparison>,
    pub total_js_bits: f64,
    pub mean_js_distance: Option<f64>,
    pub numeric: NumericComparison,
    pub dependence: DependenceSummary,
}

pub fn fidelity_report(real: &Table, synth: &Table, q_low: f64, q_high: f64) -> Result<FidelityReport> {
    let categorical = categorical_comparisons(real, synth)?;
    let total_js_bits = categorical.values().map(|c| c.js_divergence_bits).sum();
    let mean_js_distance = (!categorical.is_empty())
        .then(|| categorical.values().map(|c| c.js_distance).sum::<f64>() / categorical.len() as f64);
    let synth = synth.with_schema(real.schema())?;
    Ok(FidelityReport {
        categorical,
        total_js_bits,
        mean_js_distance,
        numeric: numeric_comparisons(real, &synth, q_low, q_high)?,
        dependence: dependence_matrices(real, &synth)?,
    })
}

//! HEOM embedding of mixed-type rows.
//!
//! Numeric columns are min–max scaled into `[0, 1]` using statistics of the
//! fitting table; categorical columns become one-hot blocks scaled by `1/√2`,
//! so two rows differing in one categorical level sit at unit distance.
//! Optionally every dimension is multiplied by an entropy-derived weight.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::stats;
use crate::tabular::{ColumnData, ColumnKind, Table};

/// Value of the active dimension of a one-hot block.
pub const ONE_HOT_SCALE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Default `ε` in `w_c = 1/(H_c + ε)`.
pub const DEFAULT_ENTROPY_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weighting {
    Unweighted,
    EntropyWeighted { epsilon: f64 },
}

impl Weighting {
    pub fn entropy() -> Self {
        Weighting::EntropyWeighted { epsilon: DEFAULT_ENTROPY_EPS }
    }
}

/// Hex SHA-256 digest identifying a fitted transform.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint(String);

impl Fingerprint {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        Fingerprint(hex::encode(Sha256::digest(bytes)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Dense row-major `n × d` matrix of encoded rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
    fingerprint: Fingerprint,
}

impl EncodedMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>, fingerprint: Fingerprint) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::DimensionMismatch { expected: n_rows * n_cols, got: data.len() });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("encoded matrix holds a non-finite entry".into()));
        }
        Ok(Self { n_rows, n_cols, data, fingerprint })
    }

    /// Matrix from explicit rows; used for hand-built geometry and tests.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(Error::DimensionMismatch { expected: n_cols, got: bad.len() });
        }
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        let fp = Fingerprint::of_bytes(&data.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<_>>());
        Self::new(rows.len(), n_cols, data, fp)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    /// Every entry multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.n_rows, self.n_cols, self.data.iter().map(|x| x * factor).collect(), self.fingerprint.clone())
    }
}

/// Squared Euclidean distance, accumulated in dimension order. Every
/// neighbour computation in the crate goes through this one routine.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Euclidean distance between two encoded rows.
pub fn distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(squared_distance(a, b).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
enum FittedColumn {
    Numeric { name: String, min: f64, max: f64 },
    Categorical { name: String, levels: Vec<String>, index: HashMap<String, usize> },
}

impl FittedColumn {
    fn name(&self) -> &str {
        match self {
            FittedColumn::Numeric { name, .. } | FittedColumn::Categorical { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            FittedColumn::Numeric { .. } => 1,
            FittedColumn::Categorical { levels, .. } => levels.len(),
        }
    }
}

/// Fitted HEOM encoder. Immutable after [`HeomEncoder::fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeomEncoder {
    columns: Vec<FittedColumn>,
    offsets: Vec<usize>,
    dim: usize,
    weighting: Weighting,
    entropies: Option<Vec<f64>>,
    raw_weights: Option<Vec<f64>>,
    column_weights: Vec<f64>,
    w_scale: Vec<f64>,
    fingerprint: Fingerprint,
}

impl HeomEncoder {
    pub fn fit(real: &Table, weighting: Weighting) -> Result<Self> {
        if real.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut columns = Vec::new();
        for (spec, data) in real.schema().columns().iter().zip(real.columns()) {
            columns.push(match data {
                ColumnData::Numeric(v) => {
                    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    FittedColumn::Numeric { name: spec.name.clone(), min, max }
                }
                ColumnData::Categorical(c) => {
                    let levels: Vec<String> = c.label_counts().into_keys().collect();
                    let index = levels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
                    FittedColumn::Categorical { name: spec.name.clone(), levels, index }
                }
            });
        }
        let mut offsets = Vec::with_capacity(columns.len());
        let mut dim = 0;
        for c in &columns {
            offsets.push(dim);
            dim += c.width();
        }

        let (entropies, raw_weights, column_weights) = match weighting {
            Weighting::Unweighted => (None, None, vec![1.0; columns.len()]),
            Weighting::EntropyWeighted { epsilon } => {
                if !(epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::InvalidParameter(format!("entropy epsilon must be > 0, got {epsilon}")));
                }
                let h: Vec<f64> = real
                    .columns()
                    .iter()
                    .map(|col| match col {
                        ColumnData::Numeric(v) => histogram_entropy_bits(v),
                        ColumnData::Categorical(c) => entropy_bits(&c.counts()),
                    })
                    .collect();
                let raw: Vec<f64> = h.iter().map(|hc| 1.0 / (hc + epsilon)).collect();
                let mean = stats::mean(&raw);
                let normalized = raw.iter().map(|w| w / mean).collect();
                (Some(h), Some(raw), normalized)
            }
        };

        let mut w_scale = Vec::with_capacity(dim);
        for (c, w) in columns.iter().zip(&column_weights) {
            w_scale.extend(std::iter::repeat_n(w.sqrt(), c.width()));
        }
        if w_scale.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter("weight scale must be positive and finite".into()));
        }

        let mut enc = Self {
            columns,
            offsets,
            dim,
            weighting,
            entropies,
            raw_weights,
            column_weights,
            w_scale,
            fingerprint: Fingerprint(String::new()),
        };
        enc.fingerprint = enc.compute_fingerprint();
        Ok(enc)
    }

    fn compute_fingerprint(&self) -> Fingerprint {
        let mut bytes = Vec::new();
        for c in &self.columns {
            match c {
                FittedColumn::Numeric { name, min, max } => {
                    bytes.extend(b"N");
                    bytes.extend(name.as_bytes());
                    bytes.push(0);
                    bytes.extend(min.to_le_bytes());
                    bytes.extend(max.to_le_bytes());
                }
                FittedColumn::Categorical { name, levels, .. } => {
                    bytes.extend(b"C");
                    bytes.extend(name.as_bytes());
                    bytes.push(0);
                    for l in levels {
                        bytes.extend(l.as_bytes());
                        bytes.push(0);
                    }
                }
            }
        }
        for w in &self.w_scale {
            bytes.extend(w.to_le_bytes());
        }
        Fingerprint::of_bytes(&bytes)
    }

    /// Output dimensionality `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        &self.fingerprint
    }

    pub fn w_scale(&self) -> &[f64] {
        &self.w_scale
    }

    /// Per-column weights after mean-one normalisation (all ones when unweighted).
    pub fn column_weights(&self) -> &[f64] {
        &self.column_weights
    }

    /// Per-column `1/(H_c + ε)` before normalisation.
    pub fn raw_weights(&self) -> Option<&[f64]> {
        self.raw_weights.as_deref()
    }

    /// Per-column entropies in bits, when entropy weighting is on.
    pub fn entropies(&self) -> Option<&[f64]> {
        self.entropies.as_deref()
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.iter().map(FittedColumn::name)
    }

    /// `(min, max)` of a fitted numeric column.
    pub fn numeric_range(&self, name: &str) -> Option<(f64, f64)> {
        self.columns.iter().find_map(|c| match c {
            FittedColumn::Numeric { name: n, min, max } if n == name => Some((*min, *max)),
            _ => None,
        })
    }

    /// Encode every row of `t`. Columns are matched by name; extra columns in
    /// `t` are ignored.
    pub fn encode(&self, t: &Table) -> Result<EncodedMatrix> {
        let n = t.n_rows();
        let mut data = vec![0.0; n * self.dim];
        for (fitted, &offset) in self.columns.iter().zip(&self.offsets) {
            let col = t
                .column(fitted.name())
                .map_err(|_| Error::SchemaMismatch(format!("column `{}` missing from encoded table", fitted.name())))?;
            match (fitted, col) {
                (FittedColumn::Numeric { min, max, .. }, ColumnData::Numeric(v)) => {
                    let w = self.w_scale[offset];
                    let span = max - min;
                    for (r, &x) in v.iter().enumerate() {
                        let z = if span > 0.0 { ((x - min) / span).clamp(0.0, 1.0) } else { 0.5 };
                        data[r * self.dim + offset] = z * w;
                    }
                }
                (FittedColumn::Categorical { index, .. }, ColumnData::Categorical(c)) => {
                    let slot: Vec<Option<usize>> = c.levels().iter().map(|l| index.get(l).copied()).collect();
                    for (r, &code) in c.codes().iter().enumerate() {
                        if let Some(s) = slot[code as usize] {
                            data[r * self.dim + offset + s] = ONE_HOT_SCALE * self.w_scale[offset + s];
                        }
                    }
                }
                _ => {
                    return Err(Error::SchemaMismatch(format!("column `{}` changed kind since fit", fitted.name())));
                }
            }
        }
        EncodedMatrix::new(n, self.dim, data, self.fingerprint.clone())
    }

    /// Kinds of the fitted columns, in encoding order.
    pub fn column_kinds(&self) -> Vec<(String, ColumnKind)> {
        self.columns
            .iter()
            .map(|c| match c {
                FittedColumn::Numeric { name, .. } => (name.clone(), ColumnKind::Numeric),
                FittedColumn::Categorical { name, .. } => (name.clone(), ColumnKind::Categorical),
            })
            .collect()
    }
}

/// Shannon entropy in bits of a count vector (`0·log 0 := 0`).
pub fn entropy_bits(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    let h = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>();
    h.max(0.0)
}

/// Entropy in bits of a histogram with Freedman–Diaconis bin width
/// `2·IQR·n^(−1/3)`, using bin occupancy proportions. A zero IQR or a
/// constant column collapses to one bin.
pub fn histogram_entropy_bits(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let sorted = stats::sorted(values);
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
    let width = 2.0 * iqr * (values.len() as f64).powf(-1.0 / 3.0);
    if width.is_nan() || width <= 0.0 || hi <= lo {
        return 0.0;
    }
    let bins = ((hi - lo) / width).ceil().max(1.0);
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for &x in values {
        let b = ((x - lo) / width).floor().min(bins - 1.0).max(0.0) as u64;
        *counts.entry(b).or_default() += 1;
    }
    let mut occ: Vec<(u64, usize)> = counts.into_iter().collect();
    occ.sort_unstable();
    entropy_bits(&occ.into_iter().map(|(_, c)| c).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{CategoricalColumn, ColumnSpec, TableSchema};

    fn table(nums: Vec<f64>, cats: &[&str]) -> Table {
        let schema = TableSchema::new(vec![ColumnSpec::numeric("x"), ColumnSpec::categorical("c")]).unwrap();
        Table::new(
            schema,
            vec![ColumnData::Numeric(nums), ColumnData::Categorical(CategoricalColumn::from_labels(cats))],
        )
        .unwrap()
    }

    #[test]
    fn numeric_minmax_and_dims() {
        let t = table(vec![0.0, 10.0, 5.0], &["a", "b", "c"]);
        let enc = HeomEncoder::fit(&t, Weighting::Unweighted).unwrap();
        assert_eq!(enc.numeric_range("x"), Some((0.0, 10.0)));
        assert_eq!(enc.dim(), 1 + 3);
        let x = enc.encode(&t).unwrap();
        assert_eq!(x.row(0), &[0.0, ONE_HOT_SCALE, 0.0, 0.0]);
        assert_eq!(x.row(1), &[1.0, 0.0, ONE_HOT_SCALE, 0.0]);
        assert_eq!(x.row(2)[0], 0.5);
        assert!((ONE_HOT_SCALE * ONE_HOT_SCALE - 0.5).abs() < 1e-15);
    }

    #[test]
    fn one_level_apart_is_unit_distance() {
        let t = table(vec![1.0, 1.0, 2.0], &["a", "b", "a"]);
        let enc = HeomEncoder::fit(&t, Weighting::Unweighted).unwrap();
        let x = enc.encode(&t).unwrap();
        // explicit subtraction on the one-hot block
        let diff: Vec<f64> = x.row(0).iter().zip(x.row(1)).map(|(a, b)| a - b).collect();
        let manual = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        assert!((manual - 1.0).abs() < 1e-15);
        assert!((distance(x.row(0), x.row(1)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(distance(x.row(0), x.row(0)).unwrap(), 0.0);
    }

    #[test]
    fn clamps_and_degenerate_and_unseen() {
        let fit = table(vec![0.0, 10.0], &["a", "b"]);
        let enc = HeomEncoder::fit(&fit, Weighting::Unweighted).unwrap();
        let other = table(vec![-5.0, 20.0], &["z", "a"]);
        let x = enc.encode(&other).unwrap();
        assert_eq!(x.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(x.row(1), &[1.0, ONE_HOT_SCALE, 0.0]);

        let flat = table(vec![3.0, 3.0], &["a", "a"]);
        let enc = HeomEncoder::fit(&flat, Weighting::Unweighted).unwrap();
        assert_eq!(enc.encode(&flat).unwrap().row(0)[0], 0.5);
    }

    #[test]
    fn schema_mismatch_and_empty() {
        let t = table(vec![1.0], &["a"]);
        let enc = HeomEncoder::fit(&t, Weighting::Unweighted).unwrap();
        let other = t.select(&["x"]).unwrap();
        assert!(matches!(enc.encode(&other), Err(Error::SchemaMismatch(_))));
        let empty = t.gather(&[]).unwrap();
        assert!(matches!(HeomEncoder::fit(&empty, Weighting::Unweighted), Err(Error::EmptyTable)));
        assert!(distance(&[0.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn constant_categorical_gets_inverse_eps_weight() {
        let counts = [5usize];
        // -Σ p log2 p with p = 1
        let direct: f64 = counts.iter().map(|&c| c as f64 / 5.0).map(|p| -p * p.log2()).sum();
        assert_eq!(direct, 0.0);
        assert_eq!(entropy_bits(&counts), 0.0);

        let t = table(vec![0.0, 1.0, 2.0, 3.0], &["a", "a", "a", "a"]);
        let eps = 1e-3;
        let enc = HeomEncoder::fit(&t, Weighting::EntropyWeighted { epsilon: eps }).unwrap();
        assert_eq!(enc.entropies().unwrap()[1], 0.0);
        assert!((enc.raw_weights().unwrap()[1] - 1.0 / eps).abs() < 1e-9);
        let mean = stats::mean(enc.column_weights());
        assert!((mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_dummies_share_column_weight() {
        let t = table(vec![0.0, 1.0, 5.0, 9.0, 2.0, 2.5], &["a", "b", "a", "c", "a", "b"]);
        let enc = HeomEncoder::fit(&t, Weighting::entropy()).unwrap();
        let w = enc.w_scale();
        assert_eq!(w.len(), 4);
        assert_eq!(w[1], w[2]);
        assert_eq!(w[2], w[3]);
        assert!((w[1] * w[1] - enc.column_weights()[1]).abs() < 1e-12);
        let x = enc.encode(&t).unwrap();
        assert!((x.row(0)[1] - ONE_HOT_SCALE * w[1]).abs() < 1e-15);
    }

    #[test]
    fn histogram_entropy_cases() {
        assert_eq!(histogram_entropy_bits(&[1.0, 1.0, 1.0, 1.0]), 0.0);
        // IQR zero with spread outliers: single bin
        assert_eq!(histogram_entropy_bits(&[0.0, 5.0, 5.0, 5.0, 5.0, 5.0, 10.0]), 0.0);
        let uniform: Vec<f64> = (0..1000).map(f64::from).collect();
        let h = histogram_entropy_bits(&uniform);
        // IQR 499.5 → width ≈ 99.9 → 10 roughly equal bins
        assert!(h > 3.2 && h < 3.33, "{h}");
    }

    #[test]
    fn fingerprint_tracks_fit() {
        let a = HeomEncoder::fit(&table(vec![0.0, 1.0], &["a", "b"]), Weighting::Unweighted).unwrap();
        let b = HeomEncoder::fit(&table(vec![0.0, 2.0], &["a", "b"]), Weighting::Unweighted).unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().as_str().len(), 64);
    }
}

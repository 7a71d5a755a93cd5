//! Nearest-neighbour geometry over encoded real rows: privacy radii, ANY
//! margins, the empirical ANY-risk, distance to closest record, the
//! identifiability index and the local-density proxy.
//!
//! All comparisons happen on squared distances so that every quantity agrees
//! exactly with a brute-force scan.

mod kdtree;

pub(crate) use kdtree::KdTree;
pub use kdtree::Neighbor;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{EncodedMatrix, Fingerprint};
use crate::error::{Error, Result};
use crate::stats;
use crate::tabular::{ColumnData, Table};

/// Initial candidate count for progressive widening.
pub const WIDENING_START: usize = 64;

/// Exact kNN structure over real rows with per-record privacy radii.
#[derive(Debug, Clone)]
pub struct RadiusIndex {
    tree: KdTree,
    r2: Vec<f64>,
    rmax2: f64,
    k: usize,
    k_eff: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginResult {
    /// Signed margin in squared-distance units.
    pub margin: f64,
    pub violating: bool,
}

impl MarginResult {
    fn new(margin: f64) -> Self {
        MarginResult { margin, violating: margin < 0.0 }
    }
}

/// `min(max(k, 2), n)`: the neighbour count including the self slot.
pub fn effective_k(k: usize, n: usize) -> usize {
    k.max(2).min(n)
}

/// Build the radius index. `r_i` is the distance from row `i` to its
/// `(k_eff − 1)`-th nearest other row.
pub fn build_index(x_r: &EncodedMatrix, k: usize) -> Result<RadiusIndex> {
    let n = x_r.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let k_eff = effective_k(k, n);
    let tree = KdTree::build(x_r.clone());
    let r2: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let hits = tree.knn(x_r.row(i), k_eff - 1, Some(i));
            hits.last().expect("n >= 2 leaves another row").d2
        })
        .collect();
    let rmax2 = r2.iter().copied().fold(0.0, f64::max);
    Ok(RadiusIndex { tree, r2, rmax2, k, k_eff })
}

impl RadiusIndex {
    pub fn n(&self) -> usize {
        self.tree.len()
    }

    pub fn dim(&self) -> usize {
        self.tree.dim()
    }

    /// Requested `k`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn k_eff(&self) -> usize {
        self.k_eff
    }

    pub fn matrix(&self) -> &EncodedMatrix {
        self.tree.points()
    }

    pub fn fingerprint(&self) -> &Fingerprint {
        self.tree.points().fingerprint()
    }

    pub fn squared_radii(&self) -> &[f64] {
        &self.r2
    }

    pub fn radii(&self) -> Vec<f64> {
        self.r2.iter().map(|r| r.sqrt()).collect()
    }

    pub fn r_max(&self) -> f64 {
        self.rmax2.sqrt()
    }

    pub fn r_max_squared(&self) -> f64 {
        self.rmax2
    }

    /// The `m` nearest real rows to `x`.
    pub fn nearest(&self, x: &[f64], m: usize) -> Result<Vec<Neighbor>> {
        self.check_dim(x.len())?;
        Ok(self.tree.knn(x, m, None))
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got });
        }
        Ok(())
    }

    /// `M(x) = min { d²(x, x_i) − r_i² : d(x, x_i) ≤ R_max }`, or
    /// `d²(x, x_NN) − R_max²` when no real row lies within `R_max`.
    ///
    /// Candidates are gathered nearest-first, starting from
    /// [`WIDENING_START`] and doubling, until either the ball of radius
    /// `R_max` is exhausted or every unseen row provably cannot lower the
    /// running minimum.
    pub fn margin(&self, x: &[f64]) -> Result<MarginResult> {
        self.check_dim(x.len())?;
        let n = self.n();
        let mut m = WIDENING_START.min(n);
        loop {
            let hits = self.tree.knn(x, m, None);
            let mut best = f64::INFINITY;
            for h in &hits {
                if h.d2 <= self.rmax2 {
                    best = best.min(h.d2 - self.r2[h.index]);
                }
            }
            let last = hits.last().expect("index is non-empty").d2;
            let tail_bound = last - self.rmax2;
            if last > self.rmax2 || best <= tail_bound || m == n {
                if best.is_finite() {
                    return Ok(MarginResult::new(best));
                }
                return Ok(MarginResult::new(hits[0].d2 - self.rmax2));
            }
            m = (2 * m).min(n);
        }
    }

    /// Margins of every row of `x_s`, computed in parallel.
    pub fn margins(&self, x_s: &EncodedMatrix) -> Result<Vec<f64>> {
        self.check_dim(x_s.n_cols())?;
        (0..x_s.n_rows()).into_par_iter().map(|i| self.margin(x_s.row(i)).map(|r| r.margin)).collect()
    }
}

/// Fraction of synthetic rows with a negative margin.
pub fn eps_any(idx: &RadiusIndex, x_s: &EncodedMatrix) -> Result<f64> {
    if x_s.is_empty() {
        return Err(Error::EmptySet("synthetic rows"));
    }
    let margins = idx.margins(x_s)?;
    Ok(violation_count(&margins) as f64 / margins.len() as f64)
}

pub fn violation_count(margins: &[f64]) -> usize {
    margins.iter().filter(|&&m| m < 0.0).count()
}

/// Distance from each synthetic row to its nearest reference row.
pub fn dcr(x_ref: &EncodedMatrix, x_s: &EncodedMatrix) -> Result<Vec<f64>> {
    if x_ref.is_empty() {
        return Err(Error::EmptySet("reference rows"));
    }
    if x_ref.n_cols() != x_s.n_cols() {
        return Err(Error::DimensionMismatch { expected: x_ref.n_cols(), got: x_s.n_cols() });
    }
    let tree = KdTree::build(x_ref.clone());
    Ok((0..x_s.n_rows())
        .into_par_iter()
        .map(|i| tree.nearest(x_s.row(i)).expect("non-empty reference").d2.sqrt())
        .collect())
}

/// Share of real records whose nearest synthetic row is strictly closer than
/// their own radius.
pub fn identifiability(idx_real: &RadiusIndex, x_s: &EncodedMatrix) -> Result<f64> {
    if x_s.is_empty() {
        return Err(Error::EmptySet("synthetic rows"));
    }
    idx_real.check_dim(x_s.n_cols())?;
    let tree = KdTree::build(x_s.clone());
    let x_r = idx_real.matrix();
    let hits = (0..idx_real.n())
        .into_par_iter()
        .filter(|&i| tree.nearest(x_r.row(i)).expect("non-empty synthetic").d2 < idx_real.r2[i])
        .count();
    Ok(hits as f64 / idx_real.n() as f64)
}

/// Which rows the density proxy is evaluated at.
#[derive(Debug, Clone, Copy)]
pub enum DensityQuery<'a> {
    /// The reference rows themselves, each excluding itself.
    Reference,
    /// Rows outside the reference set.
    External(&'a EncodedMatrix),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    pub mean: f64,
    pub variance: f64,
}

/// Per query row `1 / mean(distance to k nearest reference rows)`; returns
/// the population mean and variance of those proxies.
pub fn local_density_stats(reference: &EncodedMatrix, query: DensityQuery<'_>, k: usize) -> Result<DensityStats> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be positive".into()));
    }
    if reference.n_rows() <= k {
        return Err(Error::TooFewRows { needed: k + 1, got: reference.n_rows() });
    }
    let tree = KdTree::build(reference.clone());
    let proxy = |q: &[f64], exclude: Option<usize>| -> Result<f64> {
        let hits = tree.knn(q, k, exclude);
        let mean = hits.iter().map(|h| h.d2.sqrt()).sum::<f64>() / k as f64;
        if mean == 0.0 {
            Err(Error::ZeroDistance { k })
        } else {
            Ok(1.0 / mean)
        }
    };
    let proxies: Vec<f64> = match query {
        DensityQuery::Reference => {
            (0..reference.n_rows()).into_par_iter().map(|i| proxy(reference.row(i), Some(i))).collect::<Result<_>>()?
        }
        DensityQuery::External(q) => {
            if q.n_cols() != reference.n_cols() {
                return Err(Error::DimensionMismatch { expected: reference.n_cols(), got: q.n_cols() });
            }
            if q.is_empty() {
                return Err(Error::EmptySet("query rows"));
            }
            (0..q.n_rows()).into_par_iter().map(|i| proxy(q.row(i), None)).collect::<Result<_>>()?
        }
    };
    Ok(DensityStats { mean: stats::mean(&proxies), variance: stats::population_variance(&proxies) })
}

/// Z-scoring of numeric columns, fit on real data with population std.
/// Columns with zero spread map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    columns: Vec<String>,
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Standardizer {
    /// Fit on every numeric column of `real`.
    pub fn fit(real: &Table) -> Result<Self> {
        if real.is_empty() {
            return Err(Error::EmptyTable);
        }
        let mut columns = Vec::new();
        let mut means = Vec::new();
        let mut stds = Vec::new();
        for (spec, data) in real.schema().columns().iter().zip(real.columns()) {
            if let ColumnData::Numeric(v) = data {
                columns.push(spec.name.clone());
                means.push(stats::mean(v));
                stds.push(stats::population_variance(v).sqrt());
            }
        }
        if columns.is_empty() {
            return Err(Error::InvalidParameter("no numeric columns to standardize".into()));
        }
        Ok(Self { columns, means, stds })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn transform(&self, t: &Table) -> Result<EncodedMatrix> {
        let n = t.n_rows();
        let d = self.columns.len();
        let mut data = vec![0.0; n * d];
        for (j, name) in self.columns.iter().enumerate() {
            let v = t.numeric(name)?;
            for (i, &x) in v.iter().enumerate() {
                data[i * d + j] = if self.stds[j] > 0.0 { (x - self.means[j]) / self.stds[j] } else { 0.0 };
            }
        }
        let mut bytes = Vec::new();
        for ((c, m), s) in self.columns.iter().zip(&self.means).zip(&self.stds) {
            bytes.extend(c.as_bytes());
            bytes.push(0);
            bytes.extend(m.to_le_bytes());
            bytes.extend(s.to_le_bytes());
        }
        EncodedMatrix::new(n, d, data, Fingerprint::of_bytes(&bytes))
    }
}

//! Categorical mode-collapse detection and iterative patching.

use indexmap::IndexMap;
use rand::seq::index::sample as sample_indices;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity;
use crate::generators::{validate_sample, PatchableGenerator};
use crate::seed;
use crate::tabular::{crosstab, ColumnKind, Table};

/// Real levels that never occur in the synthetic table, per column.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MissingModes(pub IndexMap<String, Vec<String>>);

impl MissingModes {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of missing `(column, level)` pairs.
    pub fn total(&self) -> usize {
        self.0.values().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().flat_map(|(c, ls)| ls.iter().map(move |l| (c.as_str(), l.as_str())))
    }

    pub fn contains(&self, column: &str, level: &str) -> bool {
        self.0.get(column).is_some_and(|ls| ls.iter().any(|l| l == level))
    }
}

/// Per categorical column of `real`, labels with a real count above zero and
/// a synthetic count of zero. Synthetic-only labels are never reported.
pub fn get_mode_collapse(real: &Table, synth: &Table) -> Result<MissingModes> {
    let mut out = IndexMap::new();
    for spec in real.schema().columns().iter().filter(|c| c.kind == ColumnKind::Categorical) {
        let s = synth
            .categorical(&spec.name)
            .map_err(|_| Error::SchemaMismatch(format!("synthetic table lacks categorical column `{}`", spec.name)))?;
        let missing: Vec<String> = crosstab(real.categorical(&spec.name)?, s)
            .into_iter()
            .filter(|(_, (r, s))| *r > 0 && *s == 0)
            .map(|(l, _)| l)
            .collect();
        if !missing.is_empty() {
            out.insert(spec.name.clone(), missing);
        }
    }
    Ok(MissingModes(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchConfig {
    /// Synthetic sample size `B`.
    pub batch: usize,
    /// Rows per patch `m`.
    pub m: usize,
    pub max_rounds: usize,
    pub seed: u64,
}

impl PatchConfig {
    pub fn new(batch: usize, seed: u64) -> Self {
        Self { batch, m: 10, max_rounds: 10, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::InvalidParameter("patch size m must be at least 1".into()));
        }
        if self.batch < self.m {
            return Err(Error::InvalidParameter(format!("batch {} is smaller than m = {}", self.batch, self.m)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub round: usize,
    pub column: String,
    pub level: String,
    /// Real rows carrying the level.
    pub slice_size: usize,
    /// Random real rows added to reach `m`.
    pub augmented: usize,
    /// Level whose rows were removed to make room (first one if several).
    pub removed_level: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchOutcome {
    #[serde(skip)]
    pub table: Option<Table>,
    #[serde(skip)]
    pub initial: Option<Table>,
    pub rounds: usize,
    pub converged: bool,
    pub patches: Vec<PatchRecord>,
    pub metrics: RepairMetrics,
}

impl PatchOutcome {
    pub fn table(&self) -> &Table {
        self.table.as_ref().expect("outcome carries its table")
    }

    pub fn initial(&self) -> &Table {
        self.initial.as_ref().expect("outcome carries its initial sample")
    }
}

/// Indices of the first `m` rows of `s[column]` holding the most common
/// level, spilling into the next most common levels when needed. Returns
/// the indices (ascending) and the first level removed from.
fn removal_rows(s: &Table, column: &str, m: usize) -> Result<(Vec<usize>, String)> {
    let col = s.categorical(column)?;
    let mut by_count: Vec<(String, usize)> = col.label_counts().into_iter().collect();
    by_count.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut picked = Vec::with_capacity(m);
    'levels: for (label, _) in &by_count {
        for (i, l) in col.labels().enumerate() {
            if picked.len() == m {
                break 'levels;
            }
            if l == label {
                picked.push(i);
            }
        }
    }
    picked.sort_unstable();
    Ok((picked, by_count.first().map(|(l, _)| l.clone()).unwrap_or_default()))
}

/// Real rows carrying `level`, topped up with random real rows to size `m`.
fn patch_slice(real: &Table, column: &str, level: &str, m: usize, seed: u64) -> Result<(Table, usize, usize)> {
    let col = real.categorical(column)?;
    let mut rows: Vec<usize> = col.labels().enumerate().filter(|(_, l)| *l == level).map(|(i, _)| i).collect();
    let found = rows.len();
    if found < m {
        let mut rng = seed::rng(seed);
        let extra = m - found;
        let n = real.n_rows();
        if extra <= n {
            rows.extend(sample_indices(&mut rng, n, extra));
        } else {
            use rand::Rng as _;
            rows.extend((0..extra).map(|_| rng.random_range(0..n)));
        }
    }
    Ok((real.gather(&rows)?, found, m.saturating_sub(found)))
}

/// Patch loop: draw `B` rows, then repeatedly patch every missing
/// level with `m` rows from a frozen, fine-tuned copy of the generator.
pub fn patch_loop(gen: &dyn PatchableGenerator, real: &Table, cfg: &PatchConfig) -> Result<PatchOutcome> {
    cfg.validate()?;
    if real.is_empty() {
        return Err(Error::EmptyTable);
    }
    let schema = real.schema();
    let initial = gen.sample(cfg.batch, seed::derive(cfg.seed, 10, 0))?;
    validate_sample(schema, &initial, cfg.batch)?;
    let initial = initial.with_schema(schema)?;
    let mut s = initial.clone();
    let mut patches = Vec::new();
    let mut round = 0;
    let mut counter = 0u64;

    loop {
        let missing = get_mode_collapse(real, &s)?;
        if missing.is_empty() {
            break;
        }
        if round == cfg.max_rounds {
            let metrics = repair_metrics(real, &initial, &s)?;
            let partial = PatchOutcome {
                table: Some(s),
                initial: Some(initial),
                rounds: round,
                converged: false,
                patches,
                metrics,
            };
            return Err(Error::NonConvergence { rounds: round, partial: Box::new(partial) });
        }
        round += 1;

        let jobs: Vec<(String, String, u64)> = missing
            .iter()
            .map(|(c, l)| {
                counter += 1;
                (c.to_string(), l.to_string(), counter)
            })
            .collect();
        let tuned: Vec<(Table, usize, usize)> = jobs
            .par_iter()
            .map(|(column, level, id)| {
                let (slice, found, augmented) =
                    patch_slice(real, column, level, cfg.m, seed::derive(cfg.seed, 12, *id))?;
                let mut copy = gen.clone_boxed();
                copy.freeze_lower_layers();
                copy.fine_tune(&slice)?;
                let rows = copy.sample(cfg.m, seed::derive(cfg.seed, 11, *id))?;
                validate_sample(schema, &rows, cfg.m)?;
                Ok((rows, found, augmented))
            })
            .collect::<Result<_>>()?;

        for ((column, level, _), (rows, found, augmented)) in jobs.into_iter().zip(tuned) {
            let (remove, removed_level) = removal_rows(&s, &column, cfg.m)?;
            let mut drop = remove.into_iter().peekable();
            let mut keep = Vec::with_capacity(s.n_rows());
            for i in 0..s.n_rows() {
                if drop.peek() == Some(&i) {
                    drop.next();
                } else {
                    keep.push((0, i));
                }
            }
            keep.extend((0..rows.n_rows()).map(|r| (1, r)));
            s = Table::assemble(schema, &[&s, &rows], &keep)?;
            patches.push(PatchRecord { round, column, level, slice_size: found, augmented, removed_level });
        }
    }

    let metrics = repair_metrics(real, &initial, &s)?;
    Ok(PatchOutcome { table: Some(s), initial: Some(initial), rounds: round, converged: true, patches, metrics })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairMetrics {
    /// Pre-patch zero-coverage rate per categorical column.
    pub zcr: IndexMap<String, f64>,
    pub columns_with_zcr_pre: usize,
    /// Real mass in levels missing pre-patch, summed over columns (a fraction).
    pub mar: f64,
    pub missing_pre: usize,
    pub missing_post: usize,
    /// Initially missing levels present after patching.
    pub patched_levels: usize,
    /// Absent when nothing was missing before patching.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub srr: Option<f64>,
    pub mean_jsd_pre: Option<f64>,
    pub mean_jsd_post: Option<f64>,
    /// Post minus pre mean per-column JS distance.
    pub delta_mean_jsd: f64,
}

pub fn repair_metrics(real: &Table, synth_pre: &Table, synth_post: &Table) -> Result<RepairMetrics> {
    let pre = get_mode_collapse(real, synth_pre)?;
    let post = get_mode_collapse(real, synth_post)?;
    let mut zcr = IndexMap::new();
    let mut mar = 0.0;
    for spec in real.schema().columns().iter().filter(|c| c.kind == ColumnKind::Categorical) {
        let col = real.categorical(&spec.name)?;
        let counts = col.label_counts();
        let observed = counts.values().filter(|&&c| c > 0).count();
        let missing = pre.0.get(&spec.name).map_or(&[][..], Vec::as_slice);
        zcr.insert(spec.name.clone(), missing.len() as f64 / observed as f64);
        mar += missing.iter().map(|l| counts[l] as f64 / col.len() as f64).sum::<f64>();
    }
    let still = pre.iter().filter(|(c, l)| post.contains(c, l)).count();
    let missing_pre = pre.total();
    let jsd_pre = fidelity::mean_js_distance(real, synth_pre)?;
    let jsd_post = fidelity::mean_js_distance(real, synth_post)?;
    Ok(RepairMetrics {
        columns_with_zcr_pre: zcr.values().filter(|&&z| z > 0.0).count(),
        zcr,
        mar,
        missing_pre,
        missing_post: post.total(),
        patched_levels: missing_pre - still,
        srr: (missing_pre > 0).then(|| 1.0 - still as f64 / missing_pre as f64),
        mean_jsd_pre: jsd_pre,
        mean_jsd_post: jsd_post,
        delta_mean_jsd: jsd_post.unwrap_or(0.0) - jsd_pre.unwrap_or(0.0),
    })
}

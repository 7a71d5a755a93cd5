//! HEOM-kNN ε_ANY rejection-with-replacement.
//!
//! The current worst synthetic row is repeatedly challenged by a fresh
//! proposal, which replaces it if it either fixes a violation or widens a
//! safe margin. The loop ends once the empirical ANY-risk drops below τ or
//! the proposal budget is spent.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{Fingerprint, HeomEncoder, Weighting};
use crate::error::{Error, Result};
use crate::generators::{validate_sample, Generator};
use crate::neighbors::{build_index, violation_count, RadiusIndex};
use crate::seed;
use crate::tabular::Table;

/// Proposals drawn from the generator per call.
pub const PROPOSAL_CHUNK: usize = 256;

/// Default budget multiplier: `budget = 100 · n`.
pub const DEFAULT_BUDGET_FACTOR: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Variant {
    /// Unweighted HEOM, 2-NN radii.
    V0,
    /// Entropy-weighted HEOM, 2-NN radii.
    V1,
    /// Entropy-weighted HEOM, 5-NN radii.
    V2,
    Custom {
        weighting: Weighting,
        k: usize,
    },
}

impl Variant {
    pub fn weighting(&self) -> Weighting {
        match self {
            Variant::V0 => Weighting::Unweighted,
            Variant::V1 | Variant::V2 => Weighting::entropy(),
            Variant::Custom { weighting, .. } => *weighting,
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Variant::V0 | Variant::V1 => 2,
            Variant::V2 => 5,
            Variant::Custom { k, .. } => *k,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Variant::V0 => "V0".into(),
            Variant::V1 => "V1".into(),
            Variant::V2 => "V2".into(),
            Variant::Custom { weighting: Weighting::Unweighted, k } => format!("unweighted-k{k}"),
            Variant::Custom { weighting: Weighting::EntropyWeighted { .. }, k } => format!("weighted-k{k}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_uppercase().as_str() {
            "V0" => Some(Variant::V0),
            "V1" => Some(Variant::V1),
            "V2" => Some(Variant::V2),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub tau: f64,
    pub n: usize,
    pub variant: Variant,
    /// Maximum number of proposals; `None` means `100 · n`.
    pub budget: Option<usize>,
    pub seed: u64,
}

impl FilterConfig {
    pub fn new(tau: f64, n: usize, variant: Variant, seed: u64) -> Self {
        Self { tau, n, variant, budget: None, seed }
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn budget(&self) -> usize {
        self.budget.unwrap_or(DEFAULT_BUDGET_FACTOR * self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::InvalidParameter(format!("tau must lie in (0, 1], got {}", self.tau)));
        }
        if self.n == 0 {
            return Err(Error::InvalidParameter("sample size n must be at least 1".into()));
        }
        if self.budget() == 0 {
            return Err(Error::InvalidParameter("proposal budget must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    MetThreshold,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// 1-based proposal number at which the replacement happened.
    pub iteration: usize,
    pub replaced_index: usize,
    pub old_margin: f64,
    pub new_margin: f64,
    /// Violating rows after the replacement.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    #[serde(skip)]
    pub table: Option<Table>,
    pub final_eps: f64,
    pub initial_eps: f64,
    pub tau: f64,
    pub variant: String,
    pub k: usize,
    pub k_eff: usize,
    pub n: usize,
    pub proposals: usize,
    pub replacements: usize,
    pub feasibility: Feasibility,
    pub encoder_fingerprint: Fingerprint,
    pub trace: Vec<TraceEntry>,
}

impl FilterReport {
    pub fn table(&self) -> &Table {
        self.table.as_ref().expect("report carries its table until serialized")
    }
}

/// `(M_old < 0 ∧ M_new ≥ 0) ∨ (M_old ≥ 0 ∧ M_new > M_old)`.
pub fn accepts(old: f64, new: f64) -> bool {
    (old < 0.0 && new >= 0.0) || (old >= 0.0 && new > old)
}

/// Encoder and radius index fit once on the real table.
#[derive(Debug, Clone)]
pub struct FilterSession {
    real: Table,
    variant: Variant,
    encoder: HeomEncoder,
    index: RadiusIndex,
}

impl FilterSession {
    pub fn new(real: &Table, variant: Variant) -> Result<Self> {
        if real.n_rows() < 2 {
            return Err(Error::TooFewRows { needed: 2, got: real.n_rows() });
        }
        let encoder = HeomEncoder::fit(real, variant.weighting())?;
        let index = build_index(&encoder.encode(real)?, variant.k())?;
        Ok(Self { real: real.clone(), variant, encoder, index })
    }

    pub fn encoder(&self) -> &HeomEncoder {
        &self.encoder
    }

    pub fn index(&self) -> &RadiusIndex {
        &self.index
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Margins of every row of `t` under this session's geometry.
    pub fn margins(&self, t: &Table) -> Result<Vec<f64>> {
        self.index.margins(&self.encoder.encode(t)?)
    }

    /// Empirical ANY-risk of `t`.
    pub fn eps_any(&self, t: &Table) -> Result<f64> {
        crate::neighbors::eps_any(&self.index, &self.encoder.encode(t)?)
    }

    pub fn run(&self, gen: &dyn Generator, cfg: &FilterConfig) -> Result<FilterReport> {
        cfg.validate()?;
        if cfg.variant != self.variant {
            return Err(Error::InvalidParameter("config variant differs from the session variant".into()));
        }
        let schema = self.real.schema();
        let n = cfg.n;
        let budget = cfg.budget();

        let initial = gen.sample(n, seed::derive(cfg.seed, 1, 0))?;
        validate_sample(schema, &initial, n)?;
        let mut margins = self.margins(&initial)?;
        let mut violations = violation_count(&margins);
        let initial_eps = violations as f64 / n as f64;

        let mut worst: BTreeSet<Key> = margins.iter().enumerate().map(|(i, &m)| Key(m, i)).collect();
        // source 0 is the initial sample; chunk c is source c + 1
        let mut rows: Vec<(usize, usize)> = (0..n).map(|i| (0, i)).collect();
        let mut sources: HashMap<usize, Table> = HashMap::from([(0, initial)]);
        let mut trace = Vec::new();
        let mut proposals = 0;
        let mut chunk_id = 0;

        'outer: while (violations as f64 / n as f64) >= cfg.tau && proposals < budget {
            let chunk = gen.sample(PROPOSAL_CHUNK, seed::derive(cfg.seed, 2, chunk_id as u64))?;
            validate_sample(schema, &chunk, PROPOSAL_CHUNK)?;
            let chunk_margins = self.margins(&chunk)?;
            let source = chunk_id + 1;
            chunk_id += 1;
            let mut used = false;
            for (r, &m_new) in chunk_margins.iter().enumerate() {
                if (violations as f64 / n as f64) < cfg.tau || proposals >= budget {
                    if used {
                        sources.insert(source, chunk);
                    }
                    break 'outer;
                }
                proposals += 1;
                let Key(m_old, j) = *worst.first().expect("sample is non-empty");
                if !accepts(m_old, m_new) {
                    continue;
                }
                worst.remove(&Key(m_old, j));
                worst.insert(Key(m_new, j));
                margins[j] = m_new;
                if m_old < 0.0 && m_new >= 0.0 {
                    violations -= 1;
                }
                rows[j] = (source, r);
                used = true;
                trace.push(TraceEntry {
                    iteration: proposals,
                    replaced_index: j,
                    old_margin: m_old,
                    new_margin: m_new,
                    violations,
                });
            }
            if used {
                sources.insert(source, chunk);
            }
        }

        // keep only sources still referenced
        let mut live: Vec<usize> = rows.iter().map(|&(s, _)| s).collect();
        live.sort_unstable();
        live.dedup();
        let remap: HashMap<usize, usize> = live.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let refs: Vec<&Table> = live.iter().map(|s| &sources[s]).collect();
        let compact: Vec<(usize, usize)> = rows.iter().map(|&(s, r)| (remap[&s], r)).collect();
        let table = Table::assemble(schema, &refs, &compact)?;

        let final_eps = violations as f64 / n as f64;
        let feasibility = if final_eps < cfg.tau { Feasibility::MetThreshold } else { Feasibility::BudgetExhausted };
        Ok(FilterReport {
            table: Some(table),
            final_eps,
            initial_eps,
            tau: cfg.tau,
            variant: self.variant.name(),
            k: self.index.k(),
            k_eff: self.index.k_eff(),
            n,
            proposals,
            replacements: trace.len(),
            feasibility,
            encoder_fingerprint: self.encoder.fingerprint().clone(),
            trace,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Key(f64, usize);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

/// Fit encoder and index on `real`, then run the loop once.
pub fn run_filter(real: &Table, gen: &dyn Generator, cfg: &FilterConfig) -> Result<FilterReport> {
    FilterSession::new(real, cfg.variant)?.run(gen, cfg)
}

/// One filter run per τ, sharing encoder and index. Cell `i` is seeded with
/// `seed::cell(base.seed, i)`, so a single-τ sweep equals [`run_filter`].
pub fn sweep(real: &Table, gen: &dyn Generator, taus: &[f64], base: &FilterConfig) -> Result<Vec<(f64, FilterReport)>> {
    if taus.is_empty() {
        return Err(Error::InvalidParameter("tau grid is empty".into()));
    }
    let session = FilterSession::new(real, base.variant)?;
    sweep_with(&session, gen, taus, base)
}

pub fn sweep_with(
    session: &FilterSession,
    gen: &dyn Generator,
    taus: &[f64],
    base: &FilterConfig,
) -> Result<Vec<(f64, FilterReport)>> {
    taus.par_iter()
        .enumerate()
        .map(|(i, &tau)| {
            let cfg = FilterConfig { tau, seed: seed::cell(base.seed, i), ..base.clone() };
            session.run(gen, &cfg).map(|r| (tau, r))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{reference_generator, ReferenceMode};
    use crate::tabular::{CategoricalColumn, ColumnData, ColumnSpec, TableSchema};

    fn real(n: usize) -> Table {
        let schema = TableSchema::new(vec![ColumnSpec::numeric("x"), ColumnSpec::categorical("c")]).unwrap();
        Table::new(
            schema,
            vec![
                ColumnData::Numeric((0..n).map(|i| i as f64).collect()),
                ColumnData::Categorical(CategoricalColumn::from_labels(
                    &(0..n).map(|i| if i % 2 == 0 { "a" } else { "b" }).collect::<Vec<_>>(),
                )),
            ],
        )
        .unwrap()
    }

    /// Emits rows far above the real range, alternating with real rows.
    struct Mixed {
        real: Table,
    }

    impl Generator for Mixed {
        fn schema(&self) -> &crate::tabular::TableSchema {
            self.real.schema()
        }
        fn sample(&self, count: usize, seed: u64) -> Result<Table> {
            let n = self.real.n_rows();
            let xs: Vec<f64> = (0..count)
                .map(|i| if (i as u64 + seed).is_multiple_of(2) { 1e6 } else { ((i * 7) % n) as f64 })
                .collect();
            let cs: Vec<&str> = xs.iter().map(|&x| if x > 1e5 { "z" } else { "a" }).collect();
            Table::new(
                self.real.schema().clone(),
                vec![ColumnData::Numeric(xs), ColumnData::Categorical(CategoricalColumn::from_labels(&cs))],
            )
        }
    }

    #[test]
    fn acceptance_predicate() {
        assert!(accepts(-1.0, 0.0));
        assert!(!accepts(-1.0, -0.5));
        assert!(accepts(0.5, 0.6));
        assert!(!accepts(0.5, 0.5));
        assert!(!accepts(0.0, -1.0));
    }

    #[test]
    fn replaying_reals_exhausts_budget() {
        let r = real(10);
        let g = reference_generator(&r, ReferenceMode::BootstrapJitter { sigma: 0.0 }, 0).unwrap();
        let cfg = FilterConfig::new(0.5, 10, Variant::V0, 3).with_budget(500);
        let rep = run_filter(&r, &g, &cfg).unwrap();
        assert_eq!(rep.feasibility, Feasibility::BudgetExhausted);
        assert_eq!(rep.initial_eps, 1.0);
        assert_eq!(rep.final_eps, 1.0);
        assert_eq!(rep.proposals, 500);
        assert_eq!(rep.replacements, 0);
    }

    #[test]
    fn mixed_generator_meets_threshold() {
        let r = real(10);
        let g = Mixed { real: r.clone() };
        let cfg = FilterConfig::new(0.2, 10, Variant::V0, 1);
        let rep = run_filter(&r, &g, &cfg).unwrap();
        assert_eq!(rep.feasibility, Feasibility::MetThreshold);
        assert!(rep.final_eps <= 0.1);
        let session = FilterSession::new(&r, Variant::V0).unwrap();
        assert_eq!(session.eps_any(rep.table()).unwrap(), rep.final_eps);
        let mut last = usize::MAX;
        for t in &rep.trace {
            assert!(accepts(t.old_margin, t.new_margin));
            assert!(t.violations <= last);
            last = t.violations;
        }
    }

    #[test]
    fn loop_skipped_when_already_safe() {
        let r = real(10);
        struct Far(Table);
        impl Generator for Far {
            fn schema(&self) -> &crate::tabular::TableSchema {
                self.0.schema()
            }
            fn sample(&self, count: usize, _seed: u64) -> Result<Table> {
                Table::new(
                    self.0.schema().clone(),
                    vec![
                        ColumnData::Numeric(vec![1e9; count]),
                        ColumnData::Categorical(CategoricalColumn::from_labels(&vec!["z"; count])),
                    ],
                )
            }
        }
        let rep = run_filter(&r, &Far(r.clone()), &FilterConfig::new(0.1, 5, Variant::V1, 0)).unwrap();
        assert_eq!(rep.proposals, 0);
        assert_eq!(rep.final_eps, 0.0);
        assert_eq!(rep.feasibility, Feasibility::MetThreshold);
    }

    #[test]
    fn single_tau_sweep_equals_run() {
        let r = real(30);
        let g = reference_generator(&r, ReferenceMode::BootstrapJitter { sigma: 0.5 }, 7).unwrap();
        let cfg = FilterConfig::new(0.3, 20, Variant::V2, 11);
        let single = run_filter(&r, &g, &cfg).unwrap();
        let swept = sweep(&r, &g, &[0.3], &cfg).unwrap();
        assert_eq!(swept[0].1, single);
        let twice = sweep(&r, &g, &[0.3, 0.3], &cfg).unwrap();
        assert_eq!(twice[0].1, single);
    }

    #[test]
    fn config_validation() {
        let r = real(4);
        let g = reference_generator(&r, ReferenceMode::IndependentMarginals, 0).unwrap();
        assert!(run_filter(&r, &g, &FilterConfig::new(0.0, 3, Variant::V0, 0)).is_err());
        assert!(run_filter(&r, &g, &FilterConfig::new(1.5, 3, Variant::V0, 0)).is_err());
        assert!(run_filter(&r, &g, &FilterConfig::new(0.5, 0, Variant::V0, 0)).is_err());
        assert!(matches!(
            run_filter(&r.gather(&[0]).unwrap(), &g, &FilterConfig::new(0.5, 3, Variant::V0, 0)),
            Err(Error::TooFewRows { .. })
        ));
    }
}

//! Composition of the metric suites for one (real, synthetic) pair.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::encoder::{HeomEncoder, Weighting};
use crate::error::Result;
use crate::fidelity::{fidelity_report, FidelityReport};
use crate::filter::{FilterReport, FilterSession};
use crate::modepatch::PatchOutcome;
use crate::neighbors;
use crate::privacy::{self, AiaEntry, CapReport, DcrReport, LDiversityPair, TrainedOn};
use crate::tabular::{ColumnKind, Table};
use crate::utility::{self, ImportanceAgreement, LogisticLearner, UtilityScores};

use super::config::PipelineConfig;

/// The real side of an evaluation.
#[derive(Debug, Clone)]
pub struct RealData {
    pub train: Table,
    pub test: Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilitySection {
    pub scores: UtilityScores,
    pub importance: ImportanceAgreement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub quasi_identifiers: Vec<String>,
    pub sensitive: Vec<String>,
    pub dcr: DcrReport,
    pub eps_any: f64,
    pub identifiability: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap: Option<CapReport>,
    pub aia: Vec<AiaEntry>,
    pub l_diversity: IndexMap<String, LDiversityPair>,
}

/// One result cell of a report. `tau` is absent for unfiltered samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub variant: String,
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch: Option<PatchOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub privacy: Option<PrivacyReport>,
}

impl Cell {
    pub fn new(variant: impl Into<String>, tau: Option<f64>) -> Self {
        Cell { variant: variant.into(), tau, patch: None, filter: None, fidelity: None, utility: None, privacy: None }
    }
}

pub fn privacy_report(
    cfg: &PipelineConfig,
    session: &FilterSession,
    real: &RealData,
    synth: &Table,
) -> Result<PrivacyReport> {
    let schema = real.train.schema();
    let qis = &cfg.privacy.quasi_identifiers;
    let enc = HeomEncoder::fit(&real.train, Weighting::Unweighted)?;
    let x_s = session.encoder().encode(synth)?;
    let categorical_sensitive: Vec<String> = cfg
        .privacy
        .sensitive
        .iter()
        .filter(|s| schema.column(s).is_some_and(|c| c.kind == ColumnKind::Categorical))
        .cloned()
        .collect();
    let cap_keys = cfg.categorical_quasi_ids(schema);
    let cap = if categorical_sensitive.is_empty() || cap_keys.is_empty() {
        None
    } else {
        Some(privacy::cap_report(&real.test, synth, &cap_keys, &categorical_sensitive)?)
    };
    let mut aia = Vec::new();
    if !qis.is_empty() {
        for target in &cfg.privacy.sensitive {
            aia.push(privacy::aia(synth, &real.test, qis, target)?);
            aia.push(privacy::aia(&real.train, &real.test, qis, target)?.trained_on(TrainedOn::Real));
        }
    }
    Ok(PrivacyReport {
        quasi_identifiers: qis.clone(),
        sensitive: cfg.privacy.sensitive.clone(),
        dcr: privacy::dcr_rpr(&enc, &real.train, &real.test, synth)?,
        eps_any: neighbors::eps_any(session.index(), &x_s)?,
        identifiability: neighbors::identifiability(session.index(), &x_s)?,
        cap,
        aia,
        l_diversity: privacy::l_diversity_report(&real.train, synth, qis, &categorical_sensitive)?,
    })
}

pub fn utility_section(cfg: &PipelineConfig, real: &RealData, synth: &Table) -> Result<UtilitySection> {
    let target = utility::schema_target(real.train.schema())?;
    let m = &cfg.metrics;
    let scores = utility::tstr_trtr(&real.train, &real.test, synth, &utility::default_learners(), &target, cfg.seed)?;
    let importance = utility::importance_agreement(
        &real.train,
        &real.test,
        synth,
        &LogisticLearner::default(),
        &target,
        m.pfi_metric,
        m.pfi_permutations,
        m.rbo_p,
        cfg.seed,
    )?;
    Ok(UtilitySection { scores, importance })
}

/// Fills the enabled metric suites of `cell` for `synth`.
pub fn evaluate_into(
    cell: &mut Cell,
    cfg: &PipelineConfig,
    session: &FilterSession,
    real: &RealData,
    synth: &Table,
) -> Result<()> {
    let m = &cfg.metrics;
    if m.fidelity {
        cell.fidelity = Some(fidelity_report(&real.train, synth, m.q_low, m.q_high)?);
    }
    if m.utility {
        cell.utility = Some(utility_section(cfg, real, synth)?);
    }
    if m.privacy {
        cell.privacy = Some(privacy_report(cfg, session, real, synth)?);
    }
    Ok(())
}

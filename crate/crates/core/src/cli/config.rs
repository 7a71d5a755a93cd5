//! Pipeline configuration file.
//!
//! ```toml
//! seed = 42
//!
//! [paths]
//! real = "census.csv"
//! schema = "census.schema.toml"
//! output = "out"
//!
//! [generator]
//! kind = "bootstrap_jitter"
//! sigma = 0.05
//!
//! [filter]
//! variant = "V1"
//! taus = [0.4, 0.2, 0.1]
//!
//! [privacy]
//! quasi_identifiers = ["sex", "race"]
//! sensitive = ["income"]
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::Weighting;
use crate::error::{Error, Result};
use crate::fidelity::{DEFAULT_Q_HIGH, DEFAULT_Q_LOW};
use crate::filter::Variant;
use crate::generators::ReferenceMode;
use crate::tabular::{ColumnKind, TableSchema};
use crate::utility::{Metric, DEFAULT_PFI_PERMUTATIONS, DEFAULT_RBO_P};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub real: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Fixed synthetic table; when absent rows come from `[generator]`.
    pub synthetic: Option<PathBuf>,
    /// Real holdout; when absent the real table is split.
    pub test: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    #[serde(flatten)]
    pub mode: ReferenceMode,
    /// Synthetic rows for `detect`, `patch` and `eval`; defaults to the
    /// real training size.
    pub rows: Option<usize>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig { mode: ReferenceMode::IndependentMarginals, rows: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSection {
    /// `V0`, `V1`, `V2` or `custom`.
    pub variant: String,
    /// Neighbour count for `custom`.
    pub k: Option<usize>,
    /// Entropy weighting for `custom`.
    pub weighted: Option<bool>,
    pub taus: Vec<f64>,
    /// Filtered sample size; defaults to the real training size.
    pub n: Option<usize>,
    pub budget: Option<usize>,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection { variant: "V1".into(), k: None, weighted: None, taus: vec![0.2], n: None, budget: None }
    }
}

impl FilterSection {
    pub fn variant(&self) -> Result<Variant> {
        if self.variant.eq_ignore_ascii_case("custom") {
            let k = self.k.ok_or_else(|| Error::Config("custom variant needs filter.k".into()))?;
            let weighting = if self.weighted.unwrap_or(true) { Weighting::entropy() } else { Weighting::Unweighted };
            return Ok(Variant::Custom { weighting, k });
        }
        if self.k.is_some() || self.weighted.is_some() {
            return Err(Error::Config("filter.k and filter.weighted apply only to variant = \"custom\"".into()));
        }
        Variant::parse(&self.variant).ok_or_else(|| Error::Config(format!("unknown filter variant {:?}", self.variant)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchSection {
    /// Run mode patching before filtering in `sweep`.
    pub enabled: bool,
    /// Defaults to the real training size.
    pub batch: Option<usize>,
    pub m: usize,
    pub max_rounds: usize,
}

impl Default for PatchSection {
    fn default() -> Self {
        PatchSection { enabled: false, batch: None, m: 10, max_rounds: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    pub fidelity: bool,
    pub utility: bool,
    pub privacy: bool,
    pub q_low: f64,
    pub q_high: f64,
    pub rbo_p: f64,
    pub pfi_permutations: usize,
    pub pfi_metric: Metric,
}

impl Default for MetricsSection {
    fn default() -> Self {
        MetricsSection {
            fidelity: true,
            utility: true,
            privacy: true,
            q_low: DEFAULT_Q_LOW,
            q_high: DEFAULT_Q_HIGH,
            rbo_p: DEFAULT_RBO_P,
            pfi_permutations: DEFAULT_PFI_PERMUTATIONS,
            pfi_metric: Metric::Accuracy,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrivacySection {
    pub quasi_identifiers: Vec<String>,
    pub sensitive: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub filter: FilterSection,
    #[serde(default)]
    pub patch: PatchSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub privacy: PrivacySection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config parses")
    }
}

fn resolve(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let p = &mut cfg.paths;
        for slot in [&mut p.real, &mut p.schema, &mut p.synthetic, &mut p.test, &mut p.output] {
            resolve(base, slot);
        }
        Ok(cfg)
    }

    /// Sorted descending with duplicates removed.
    pub fn taus(&self) -> Result<Vec<f64>> {
        let mut taus = self.filter.taus.clone();
        if taus.is_empty() {
            return Err(Error::Config("filter.taus is empty".into()));
        }
        if let Some(bad) = taus.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return Err(Error::Config(format!("tau {bad} outside (0, 1]")));
        }
        taus.sort_by(|a, b| b.total_cmp(a));
        taus.dedup();
        Ok(taus)
    }

    pub fn require<'a>(&self, p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        p.as_deref().ok_or_else(|| Error::Config(format!("missing paths.{what}")))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.paths.output.clone().unwrap_or_else(|| PathBuf::from("synthpost-out"))
    }

    /// Semantic checks that need the schema.
    pub fn validate(&self, schema: &TableSchema) -> Result<()> {
        self.taus()?;
        self.filter.variant()?;
        let m = &self.metrics;
        if !(0.0 < m.q_low && m.q_low < m.q_high && m.q_high < 1.0) {
            return Err(Error::Config(format!("need 0 < q_low < q_high < 1, got {} and {}", m.q_low, m.q_high)));
        }
        if !(m.rbo_p > 0.0 && m.rbo_p < 1.0) {
            return Err(Error::Config(format!("rbo_p must lie in (0, 1), got {}", m.rbo_p)));
        }
        if m.pfi_permutations == 0 {
            return Err(Error::Config("pfi_permutations must be at least 1".into()));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::Config("split.train_fraction must lie in (0, 1)".into()));
        }
        for name in self.privacy.quasi_identifiers.iter().chain(&self.privacy.sensitive) {
            if schema.column(name).is_none() {
                return Err(Error::Config(format!("column {name:?} is not in the schema")));
            }
        }
        if self.metrics.privacy {
            for q in &self.privacy.sensitive {
                if self.privacy.quasi_identifiers.contains(q) {
                    return Err(Error::Config(format!("{q:?} is both quasi-identifier and sensitive")));
                }
            }
        }
        Ok(())
    }

    /// Categorical quasi-identifiers, the only ones usable as CAP keys.
    pub fn categorical_quasi_ids(&self, schema: &TableSchema) -> Vec<String> {
        self.privacy
            .quasi_identifiers
            .iter()
            .filter(|q| schema.column(q).is_some_and(|c| c.kind == ColumnKind::Categorical))
            .cloned()
            .collect()
    }

    /// sha256 of the canonical JSON rendering of the parsed config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical))
    }
}

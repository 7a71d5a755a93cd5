//! Generator interface and a statistical reference sampler.

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::stats;
use crate::tabular::{ColumnData, Table, TableSchema};

/// Anything that can emit synthetic rows for a fixed schema.
///
/// `sample` must be a pure function of `(count, seed)`.
pub trait Generator: Send + Sync {
    fn schema(&self) -> &TableSchema;
    fn sample(&self, count: usize, seed: u64) -> Result<Table>;
}

/// A generator that supports the layer-frozen patching protocol.
pub trait PatchableGenerator: Generator {
    /// Independent copy; tuning the copy leaves `self` untouched.
    fn clone_boxed(&self) -> Box<dyn PatchableGenerator>;
    fn freeze_lower_layers(&mut self);
    fn fine_tune(&mut self, slice: &Table) -> Result<()>;
}

/// Check that a generator's output has the expected shape.
pub fn validate_sample(expected: &TableSchema, t: &Table, count: usize) -> Result<()> {
    if t.n_rows() != count {
        return Err(Error::GeneratorFailure(format!("asked for {count} rows, got {}", t.n_rows())));
    }
    if !t.schema().same_shape(expected) {
        return Err(Error::GeneratorFailure("sample does not match the real schema".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceMode {
    /// Each column drawn independently from its empirical marginal.
    IndependentMarginals,
    /// Whole real rows resampled, numerics perturbed by `sigma · std`.
    BootstrapJitter { sigma: f64 },
}

/// Desk-scale stand-in for a deep tabular generator.
#[derive(Debug, Clone)]
pub struct ReferenceGenerator {
    fitted: Table,
    stds: Vec<f64>,
    mode: ReferenceMode,
    seed: u64,
    frozen: bool,
}

pub fn reference_generator(real: &Table, mode: ReferenceMode, seed: u64) -> Result<ReferenceGenerator> {
    ReferenceGenerator::new(real, mode, seed)
}

impl ReferenceGenerator {
    pub fn new(real: &Table, mode: ReferenceMode, seed: u64) -> Result<Self> {
        if real.is_empty() {
            return Err(Error::EmptyTable);
        }
        if let ReferenceMode::BootstrapJitter { sigma } = mode {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
            }
        }
        Ok(Self { stds: column_stds(real), fitted: real.clone(), mode, seed, frozen: false })
    }

    pub fn mode(&self) -> ReferenceMode {
        self.mode
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// Table the sampler currently draws from.
    pub fn fitted(&self) -> &Table {
        &self.fitted
    }
}

fn column_stds(t: &Table) -> Vec<f64> {
    t.columns()
        .iter()
        .map(|c| match c {
            ColumnData::Numeric(v) => stats::population_variance(v).sqrt(),
            ColumnData::Categorical(_) => 0.0,
        })
        .collect()
}

impl Generator for ReferenceGenerator {
    fn schema(&self) -> &TableSchema {
        self.fitted.schema()
    }

    fn sample(&self, count: usize, seed: u64) -> Result<Table> {
        let n = self.fitted.n_rows();
        let mut rng = seed::rng(seed::derive(self.seed, 0x6E4E, seed));
        let columns = match self.mode {
            ReferenceMode::IndependentMarginals => self
                .fitted
                .columns()
                .iter()
                .map(|col| {
                    let rows: Vec<usize> = (0..count).map(|_| rng.random_range(0..n)).collect();
                    col.take(&rows)
                })
                .collect(),
            ReferenceMode::BootstrapJitter { sigma } => {
                let rows: Vec<usize> = (0..count).map(|_| rng.random_range(0..n)).collect();
                self.fitted
                    .columns()
                    .iter()
                    .zip(&self.stds)
                    .map(|(col, &sd)| match col.take(&rows) {
                        ColumnData::Numeric(mut v) if sigma > 0.0 && sd > 0.0 => {
                            for x in &mut v {
                                let z: f64 = StandardNormal.sample(&mut rng);
                                *x += sigma * sd * z;
                            }
                            ColumnData::Numeric(v)
                        }
                        other => other,
                    })
                    .collect()
            }
        };
        Table::new(self.fitted.schema().clone(), columns)
    }
}

impl PatchableGenerator for ReferenceGenerator {
    fn clone_boxed(&self) -> Box<dyn PatchableGenerator> {
        Box::new(self.clone())
    }

    /// No layers to freeze in a statistical sampler; only recorded.
    fn freeze_lower_layers(&mut self) {
        self.frozen = true;
    }

    /// Refit every marginal on `slice`.
    fn fine_tune(&mut self, slice: &Table) -> Result<()> {
        if slice.is_empty() {
            return Err(Error::EmptyTable);
        }
        let aligned = slice.with_schema(self.fitted.schema())?;
        self.stds = column_stds(&aligned);
        self.fitted = aligned;
        Ok(())
    }
}

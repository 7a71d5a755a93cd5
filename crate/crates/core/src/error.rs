use thiserror::Error;

use crate::modepatch::PatchOutcome;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("column `{0}` is missing from the input")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as a finite number")]
    UnparsableNumeric { row: usize, column: String, value: String },

    #[error("row {row}, column `{column}`: missing value")]
    MissingValue { row: usize, column: String },

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("column `{column}` is not {expected}")]
    ColumnKindMismatch { column: String, expected: &'static str },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("table is empty")]
    EmptyTable,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty set: {0}")]
    EmptySet(&'static str),

    #[error("all {k} nearest neighbours coincide with the query; density proxy is infinite")]
    ZeroDistance { k: usize },

    #[error("generator failure: {0}")]
    GeneratorFailure(String),

    #[error("mode patching did not converge after {rounds} rounds")]
    NonConvergence { rounds: usize, partial: Box<PatchOutcome> },

    #[error("pooled standard deviation is zero but the means differ")]
    ZeroPooledStd,

    #[error("target column `{0}` is missing or not usable")]
    MissingTarget(String),

    #[error("training labels contain a single class")]
    SingleClassTraining,

    #[error("ROC AUC needs both classes present")]
    OneClassOnly,

    #[error("ranked list contains duplicate items")]
    DuplicateItems,

    #[error("ranked lists are over different item universes")]
    MismatchedUniverse,

    #[error("sensitive column `{0}` must be categorical")]
    NonCategoricalSensitive(String),

    #[error("target has zero variance on the evaluation set")]
    ZeroVarianceTarget,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

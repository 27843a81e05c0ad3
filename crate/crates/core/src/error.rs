use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dual point is not strictly inside the simplex (block {block})")]
    InfeasibleDual { block: usize },

    #[error("feature index {0} is out of range or already screened")]
    FeatureIndex(usize),

    #[error("ball radius squared is {0:e}, far below zero; the dual value bookkeeping is inconsistent")]
    NegativeRadius(f64),

    #[error("non-finite objective at epoch {epoch}: {what}")]
    NonFinite { epoch: usize, what: &'static str },

    #[error("solver did not reach gap {target:e} within {epochs} epochs (last gap {gap:e})")]
    NotConverged { target: f64, epochs: usize, gap: f64 },

    #[error("invalid generator config: {0}")]
    GeneratorConfig(String),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("dataset dimension mismatch in {path}: {reason}")]
    DatasetShape { path: PathBuf, reason: String },

    #[error("unsupported dataset format version {0}")]
    UnknownVersion(u32),

    #[error("label {label} out of range 1..={classes} on row {row}")]
    LabelOutOfRange {
        row: usize,
        label: i64,
        classes: usize,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown config key `{0}`")]
    UnknownConfigKey(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the decomposition, modeling and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("rank {requested} out of range (available rank {rank})")]
    RankOutOfRange { requested: usize, rank: usize },

    #[error("column {0} has zero variance and cannot be normalized")]
    ZeroVariance(usize),

    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    #[error("scale mismatch: expected {expected}, found {found}")]
    ScaleMismatch { expected: String, found: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing covariate '{name}' for schedule '{label}'")]
    MissingCovariate { name: String, label: String },

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("{n} observations are not enough to estimate {p} parameters")]
    InsufficientData { n: usize, p: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{path}: row {row}, column {col}: {msg}")]
    Parse {
        path: PathBuf,
        row: usize,
        col: usize,
        msg: String,
    },

    #[error("{path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the supplied data.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::RankDeficient)
    }

    pub(crate) fn shape(expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            expected: expected.into(),
            found: found.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed array file: {0}")]
    Format(String),

    #[error("non-finite value at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("payload length mismatch: header declares {expected} bytes, found {found}")]
    PayloadLength { expected: usize, found: usize },

    #[error("expected {expected}-D array, found shape {shape:?}")]
    Rank { expected: usize, shape: Vec<usize> },

    #[error("label out of range: {value} at index {index} (n_classes = {n_classes})")]
    LabelOutOfRange {
        index: usize,
        value: i64,
        n_classes: usize,
    },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("split not found in manifest: {0}")]
    MissingSplit(String),

    #[error("id_train requires labels (split {0})")]
    MissingLabels(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error("degenerate training data: {0}")]
    Degenerate(String),

    #[error("{method} requires {what}")]
    Requirement { method: String, what: String },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("cannot place means; relax separation ({attempts} attempts)")]
    Placement { attempts: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("duplicate report cell: ({method}, {ood_split})")]
    DuplicateCell { method: String, ood_split: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn requires(method: impl ToString, what: impl ToString) -> Self {
        Error::Requirement {
            method: method.to_string(),
            what: what.to_string(),
        }
    }
}

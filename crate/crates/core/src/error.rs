use std::path::PathBuf;

use thiserror::Error;

use crate::tabular::Dtype;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("input is empty: {0}")]
    EmptyInput(String),

    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },

    #[error("duplicate column name `{0}`")]
    DuplicateColumn(String),

    #[error("value `{raw}` does not parse as {dtype}")]
    Dtype { raw: String, dtype: Dtype },

    #[error("schema: {0}")]
    Schema(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("query syntax: {0}")]
    QuerySyntax(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("value id {id} out of range for column {column} (domain size {domain})")]
    IdOutOfRange { column: usize, id: u32, domain: usize },

    #[error("region has {size} points, above the enumeration threshold {threshold}; use progressive sampling")]
    RegionTooLarge { size: String, threshold: u64 },

    #[error("wildcard-skipping requested but the model was trained without wildcard augmentation")]
    SkipWithoutAugmentation,

    #[error("model file: bad magic (expected NARUv1)")]
    BadMagic,

    #[error("model file: tensor data size mismatch (expected {expected} bytes, found {found})")]
    SizeMismatch { expected: usize, found: usize },

    #[error("dictionary hash mismatch (model {model}, table {table})")]
    HashMismatch { model: String, table: String },

    #[error("model file: malformed metadata: {0}")]
    Metadata(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

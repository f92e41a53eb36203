//! Error type shared by every module of the library.

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while loading data, training forests or computing proximities.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("column `{0}` not found in header")]
    MissingColumn(String),

    #[error("no usable rows ({dropped} dropped for missing values)")]
    NoUsableRows { dropped: usize },

    #[error("column mismatch: {0}")]
    ColumnMismatch(String),

    #[error("invalid timestamp `{value}` in column `{column}`")]
    InvalidTimestamp { column: String, value: String },

    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },

    #[error("split with train fraction {fraction} over {n_rows} rows leaves an empty side")]
    EmptySplit { n_rows: usize, fraction: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),

    #[error("need at least {required} rows, got {got}")]
    TooFewRows { required: usize, got: usize },

    #[error("feature count mismatch: forest expects {expected}, got {got}")]
    FeatureMismatch { expected: usize, got: usize },

    #[error("training row {0} is in-bag for every tree (never out-of-bag)")]
    NeverOob(usize),

    #[error("index {index} out of range for {len} training rows")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("label {label} is not a valid class id for {n_classes} classes")]
    InvalidLabel { label: f64, n_classes: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("dense proximity matrix refused for {n} training rows (limit {limit})")]
    DenseTooLarge { n: usize, limit: usize },

    #[error("unsupported model format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("malformed forest: {0}")]
    MalformedForest(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

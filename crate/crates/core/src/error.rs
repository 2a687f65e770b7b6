//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(String),
    #[error("ragged row at line {line}: expected {expected} cells, found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("unknown column '{0}'")]
    UnknownColumn(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{what} must be binary: found {count} distinct values")]
    NotBinary { what: String, count: usize },
    #[error("dataset too small: {n} rows (minimum {min})")]
    DatasetTooSmall { n: usize, min: usize },
    #[error("split left the {half} half without {class}; try a different split seed")]
    SplitDegenerate { half: String, class: String },
    #[error("dimension mismatch: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("non-finite gradient: {0}")]
    NonFiniteGradient(String),
    #[error("training diverged at epoch {epoch}; last finite loss {last_loss} at epoch {last_epoch}")]
    Diverged {
        epoch: usize,
        last_epoch: usize,
        last_loss: f64,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("rank deficiency: column {0} is collinear with earlier columns")]
    RankDeficient(usize),
    #[error("insufficient flippable instances: K={k} exceeds both caps ({cap_a} up-flips, {cap_b} down-flips)")]
    InsufficientFlips { k: usize, cap_a: usize, cap_b: usize },
    #[error("json error: {0}")]
    Json(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

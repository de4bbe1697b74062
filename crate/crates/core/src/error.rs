use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column {column} is constant and cannot be normalized")]
    ZeroVarianceColumn { column: usize },

    #[error("design matrix is rank deficient (smallest/largest singular value ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("response violates the {expected} domain at row {row}: {value}")]
    Domain {
        expected: &'static str,
        row: usize,
        value: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(
        "MLE did not converge after {iterations} iterations (gradient norm {gradient_norm:.3e})"
    )]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("MLE diverges: coefficients exceeded {threshold} after {iterations} iterations (data are separated)")]
    Separation { iterations: usize, threshold: f64 },

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
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

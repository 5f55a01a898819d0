use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ConfigRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("config has no [{0}] section")]
    MissingSection(&'static str),
    #[error("invalid model: {0}")]
    ModelInvalid(String),
    #[error("cannot read series {path}: {reason}")]
    SeriesRead { path: PathBuf, reason: String },
    #[error("series {a} and {b} are on different time grids (pass --interpolate to resample)")]
    GridMismatch { a: String, b: String },
    #[error("compare needs at least two series")]
    TooFewSeries,
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// Every error is a rejected input or environment, never a failed
    /// comparison.
    pub fn exit_code(&self) -> u8 {
        crate::EXIT_VALIDATION
    }

    pub(crate) fn model(e: impl std::fmt::Display) -> Self {
        CliError::ModelInvalid(e.to_string())
    }
}

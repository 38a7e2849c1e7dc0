use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("value outside domain: {0}")]
    Domain(String),

    #[error("no tabulated threshold for alpha={alpha}, m={m}")]
    NotTabulated { alpha: f64, m: usize },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("needs calibration: {0}")]
    NeedsCalibration(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    /// Stable machine-readable tag for error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::InsufficientData { .. } => "insufficient-data",
            Error::Domain(_) => "domain",
            Error::NotTabulated { .. } => "not-tabulated",
            Error::DegenerateModel(_) => "degenerate-model",
            Error::NeedsCalibration(_) => "needs-calibration",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Config(_) => "config",
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] dbound_core::Error),
    #[error("trial count must be at least 1")]
    ZeroTrials,
    #[error("worker pool: {0}")]
    Pool(String),
    #[error("unknown figure id {0:?}")]
    UnknownFigure(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

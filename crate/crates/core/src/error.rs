use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad hyperparameter, ratio, cutoff or other caller-supplied value.
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a structural expectation (empty, misaligned, non-finite...).
    #[error("data error: {0}")]
    Data(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error(
        "refusing n = {n}: three dense {n}x{n} f64 matrices need {needed} bytes, memory cap is {cap} bytes"
    )]
    MemoryCap { n: usize, needed: u128, cap: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Param(_) | Error::Config(_) => 1,
            Error::Data(_)
            | Error::Parse { .. }
            | Error::Dimension(_)
            | Error::Io { .. }
            | Error::Json { .. } => 2,
            Error::Solver(_) | Error::MemoryCap { .. } => 3,
        }
    }
}

use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported dimension n={0} (implemented: 2, 3)")]
    UnsupportedDimension(usize),

    #[error("unknown kernel `{0}`")]
    UnknownKernel(String),

    #[error("unknown weight `{0}`")]
    UnknownWeight(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("kernel `{kernel}` evaluated to a non-finite value at x={x:?}, xi={xi:?}")]
    Evaluation {
        kernel: String,
        x: Vec<f64>,
        xi: Vec<f64>,
    },

    #[error("harmonic index out of range: s={s}, m={m}")]
    InvalidIndex { s: usize, m: usize },

    #[error("evaluation at the singular point xi=0")]
    SingularPoint,

    #[error("non-finite sample {value} at grid point {point:?}")]
    Sampling { point: Vec<f64>, value: f64 },

    #[error("truncation epsilon={epsilon} is below the resolvable minimum {minimum}")]
    UnderResolved { epsilon: f64, minimum: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

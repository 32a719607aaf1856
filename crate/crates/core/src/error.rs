use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("invalid frame configuration: {0}")]
    Config(String),

    #[error("transform length must be at least 1")]
    EmptyTransform,

    #[error("non-finite value at index {0}")]
    NonFinite(usize),

    #[error("cyclic prefix of {n_cp} samples exceeds body length {len}")]
    CpTooLong { n_cp: usize, len: usize },

    #[error("path {index} has delay {delay} samples, not covered by a {n_cp}-sample cyclic prefix")]
    DelayBeyondCp { index: usize, delay: usize, n_cp: usize },

    #[error("{0} waveform is not supported here")]
    Waveform(&'static str),

    #[error("expanded tensor is in stage {actual:?}, expected {expected:?}")]
    Stage {
        expected: crate::rx::TensorStage,
        actual: crate::rx::TensorStage,
    },

    #[error("LMMSE system for subcarrier {0} is singular")]
    Singular(usize),

    #[error("invalid pilot layout: {0}")]
    Layout(String),

    #[error("pilot overhead infeasible: {0}")]
    Infeasible(String),

    #[error("LDPC construction failed: {0}")]
    Ldpc(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

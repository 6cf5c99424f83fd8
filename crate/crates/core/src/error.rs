use std::path::PathBuf;

use crate::grid::BoundaryCondition;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid size {size}: at least 3 points are required per axis")]
    InvalidSize { size: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("{bc:?} boundary conditions have no orthogonal eigendecomposition; the direct solve supports Periodic and Neumann only")]
    UnsupportedBoundary { bc: BoundaryCondition },

    #[error("singular spectral coefficient {value:e} at spectral index ({row}, {col})")]
    SingularCoefficient { row: usize, col: usize, value: f64 },

    #[error("singular linear system in dense reference solve")]
    SingularSystem,

    #[error("dense reference solve limited to {limit} unknowns, got {dof}")]
    OracleTooLarge { dof: usize, limit: usize },

    #[error("degenerate splitting parameter: T = 0 has no critical value")]
    DegenerateTemperature,

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("time {t} outside schedule coverage [0, {end}]")]
    OutOfRange { t: f64, end: f64 },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("invalid value for `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("fit requires at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

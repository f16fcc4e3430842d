use std::path::PathBuf;

use thiserror::Error;

/// Which unknown tripped a positivity floor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    V,
    U,
    Chi,
    Theta,
}

impl std::fmt::Display for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Field::V => "v",
            Field::U => "u",
            Field::Chi => "chi",
            Field::Theta => "theta",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum NsacError {
    #[error("grid needs at least 8 cells, got {0}")]
    GridTooSmall(usize),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("{field} = {value:e} at node {node} violates its floor")]
    FloorViolation {
        node: usize,
        field: Field,
        value: f64,
    },

    #[error("step rejected: {0}")]
    StepRejected(Box<NsacError>),

    #[error("time step underflow at t = {t}: {cause}")]
    DtUnderflow { t: f64, cause: Box<NsacError> },

    #[error("time {t} is not a recorded snapshot time in [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("mean-value target {target:e} lies outside [{min:e}, {max:e}]")]
    Alpha0NotFound { target: f64, min: f64, max: f64 },

    #[error("need at least {required} snapshots on [0, t], history has {available}")]
    TooFewSnapshots { required: usize, available: usize },

    #[error("Sobolev order {0} out of range 0..=3")]
    SobolevOrder(usize),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NsacError>;

impl NsacError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        NsacError::Io {
            path: path.into(),
            source,
        }
    }
}

use thiserror::Error;

/// Errors raised by the learning core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("non-finite input value {0}")]
    NonFiniteInput(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("membership vector sums to zero")]
    DegenerateMembership,
    #[error("softmax temperature must be positive, got {0}")]
    InvalidTemperature(f64),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("parameter `{name}` = {value} is out of range")]
    ParameterOutOfRange { name: &'static str, value: f64 },
    #[error("Q-table update produced a non-finite entry at ({rule}, {action})")]
    NonFiniteUpdate { rule: usize, action: usize },
    #[error("transition does not continue the open segment")]
    ContiguityViolation,
    #[error("replay needs {needed} segments but only {available} are stored")]
    InsufficientData { needed: usize, available: usize },
    #[error("environment integration produced a non-finite state")]
    NonFiniteState,
    #[error("fixed-point iteration did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("cannot compute metrics of an empty return series")]
    EmptySeries,
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("seed {seed}: {source}")]
    Seed { seed: u64, source: Box<Error> },
}

impl Error {
    /// True when a run blew up numerically rather than being misconfigured.
    pub fn is_divergence(&self) -> bool {
        match self {
            Error::NonFiniteUpdate { .. } | Error::NonFiniteState | Error::NoConvergence(_) => true,
            Error::Seed { source, .. } => source.is_divergence(),
            _ => false,
        }
    }

    pub(crate) fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        Error::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

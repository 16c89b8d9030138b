use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum VqedError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{qubits} qubits exceeds the dense-rendering limit of {max}")]
    SizeLimit { qubits: usize, max: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unknown code `{0}`")]
    UnknownCode(String),

    #[error("invalid code: {0}")]
    InvalidCode(String),

    #[error("generators are dependent: group enumeration produced a duplicate element")]
    DependentGenerators,

    #[error("no Pauli operator produces syndrome {0}")]
    UnreachableSyndrome(String),

    #[error("observable is not Hermitian (residual {0:e})")]
    NonHermitian(f64),

    #[error("state is not normalized (trace or norm {0})")]
    NotNormalized(f64),

    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),

    #[error("post-selection annihilated the state (trace {0:e})")]
    Annihilated(f64),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed matrix data: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, VqedError>;

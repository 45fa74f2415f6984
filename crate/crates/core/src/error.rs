use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("qubit {qubit} is not a valid subsystem of a {num_qubits}-qubit register")]
    InvalidSubsystem { qubit: usize, num_qubits: usize },

    #[error("unsupported register size: {0} qubits (1..=4 supported)")]
    UnsupportedSize(usize),

    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("pointer spread must be positive and finite, got {0}")]
    InvalidSigma(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid measurement plan: {0}")]
    InvalidPlan(String),

    #[error("record set has no step labelled {0:?}")]
    MissingStep(String),

    #[error("no cycles available for {0}")]
    EmptySubsample(String),

    #[error("standard error is zero")]
    ZeroStandardError,

    #[error("post-measurement state has zero norm")]
    ZeroNorm,
}

pub type Result<T> = std::result::Result<T, Error>;

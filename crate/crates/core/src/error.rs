use thiserror::Error;

/// Errors raised anywhere in the discretize → compile → simulate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    QubitMismatch { left: usize, right: usize },

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid boundary specification: {0}")]
    Boundary(String),

    #[error("invalid coefficient field `{name}`: {reason}")]
    Field { name: String, reason: String },

    #[error("invalid problem: {0}")]
    Problem(String),

    #[error("index {index} out of range for {bits} bits")]
    IndexOutOfRange { index: usize, bits: usize },

    #[error("{what} exceeds the cap of {cap}")]
    CapExceeded { what: String, cap: usize },

    #[error("operator is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("solver did not converge: {what} (residual {residual:e})")]
    NotConverged { what: String, residual: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Grid(_)
            | Error::Boundary(_)
            | Error::Field { .. }
            | Error::Problem(_)
            | Error::Parse(_)
            | Error::Config(_)
            | Error::Io(_) => 2,
            Error::CapExceeded { .. } => 4,
            _ => 3,
        }
    }
}

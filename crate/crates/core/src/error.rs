use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("quadrature budget exceeded: {nodes} nodes requested, cap is {cap}")]
    QuadratureBudget { nodes: usize, cap: usize },

    #[error("network constraint violated: {0}")]
    Constraint(String),

    #[error("loss `{loss}` requires an order-2 network")]
    OrderRequired { loss: &'static str },

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),

    #[error("training diverged at step {step}: loss {loss} (initial {initial})")]
    Diverged { step: usize, loss: f64, initial: f64 },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

use crate::pipeline::InfeasibilityReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected length {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "random bit budget exhausted during {stage}: needed {needed} bits, {available} available"
    )]
    BudgetExhausted {
        stage: &'static str,
        needed: u64,
        available: u64,
    },

    #[error("degenerate randomness: column {column} is numerically dependent on its predecessors")]
    DegenerateRandomness { column: usize },

    #[error("capacity exceeded: {elements} matrix elements requested, cap is {cap}")]
    Capacity { elements: u128, cap: usize },

    #[error("columns are not orthonormal (residual {residual:e})")]
    NotOrthonormal { residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible plan: {0}")]
    Infeasible(Box<InfeasibilityReport>),

    #[error("malformed basis file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

use thiserror::Error;

use crate::lp::LpStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite (failed at pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("column {index} has zero empirical variance")]
    ConstantColumn { index: usize },

    #[error("column {index} has no observed entries")]
    EmptyColumn { index: usize },

    #[error("linear program finished with status {0:?}")]
    Solver(LpStatus),

    #[error("{failed} of {total} subproblems failed; aggregate is unreliable")]
    TooManyFailures { failed: usize, total: usize },

    #[error("combinatorial budget exceeded: {needed} candidates > budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("pivot scale undefined: every noise coefficient is zero")]
    DegeneratePivot,

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

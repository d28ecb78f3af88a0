use thiserror::Error;

/// Errors produced anywhere in the selection pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CsuvError {
    #[error("design has {rows} rows and {cols} columns; need at least {min_rows} rows and 1 column")]
    TooSmall {
        rows: usize,
        cols: usize,
        min_rows: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("column {column} is constant and cannot be standardized")]
    ConstantColumn { column: usize },

    #[error("invalid penalty: {0}")]
    InvalidPenalty(String),

    #[error("invalid lambda path: {0}")]
    InvalidPath(String),

    #[error(
        "coordinate descent did not converge at lambda index {lambda_index} after {sweeps} sweeps \
         (max coefficient change {max_change:e})"
    )]
    NoConvergence {
        lambda_index: usize,
        sweeps: usize,
        max_change: f64,
    },

    #[error("response is orthogonal to every column (lambda_max = 0)")]
    DegenerateResponse,

    #[error("cross-validation needs at least 2 folds and one observation per fold (n = {n}, folds = {folds})")]
    InvalidFolds { n: usize, folds: usize },

    #[error("support of size {support} needs more than {rows} rows for least squares")]
    SupportTooLarge { support: usize, rows: usize },

    #[error("restricted design is rank deficient; dependent columns {columns:?}")]
    RankDeficient { columns: Vec<usize> },

    #[error("empty support")]
    EmptySupport,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("covariance matrix is not positive definite (leading minor of order {order} fails)")]
    NotPositiveDefinite { order: usize },

    #[error("no admissible candidate: {0}")]
    NoCandidate(String),

    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
}

pub type Result<T, E = CsuvError> = std::result::Result<T, E>;

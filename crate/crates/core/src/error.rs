use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("malformed sparse matrix: {0}")]
    MalformedMatrix(String),

    #[error("matrix is not symmetric (max |A - A^T| = {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("non-positive pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("zero pivot at row {row}: matrix is singular to working precision")]
    Singular { row: usize },

    #[error("symbol coefficient {index:?} does not fit in a Toeplitz matrix of size {size:?}")]
    OutOfBand { index: Vec<i64>, size: Vec<usize> },

    #[error("symbol evaluation has imaginary part {imag:e}; coefficients are not real-symmetric")]
    NonRealSymbol { imag: f64 },

    #[error("non-finite value in {method} at iteration {iteration}")]
    NonFinite { method: &'static str, iteration: usize },

    #[error("{method} breakdown at iteration {iteration}")]
    Breakdown { method: &'static str, iteration: usize },

    #[error("{method}: operator is not positive definite (p^T A p = {curvature:e} at iteration {iteration})")]
    Indefinite { method: &'static str, iteration: usize, curvature: f64 },

    #[error("inertia factorization broke down near shift {shift:e} after {retries} perturbations")]
    InertiaBreakdown { shift: f64, retries: usize },

    #[error("incomplete factorization failed after {shifts} diagonal shifts")]
    IncompleteBreakdown { shifts: usize },

    #[error("inner solve failed at preconditioner stage {stage}: {reason}")]
    InnerSolve { stage: usize, reason: String },

    #[error("dense computation of order {order} exceeds the limit {limit}")]
    SizeLimit { order: usize, limit: usize },

    #[error("operation requires a Poisson-constrained system")]
    RequiresPoisson,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

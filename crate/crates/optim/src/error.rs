use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("simplex numerical failure: {0}")]
    Numerical(String),
    #[error("problem is not strictly convex")]
    NotStrictlyConvex,
    #[error("zero vector violates constraint {index} (rhs {rhs})")]
    InfeasibleStart { index: usize, rhs: f64 },
    #[error("active-set solver stopped after {iterations} iterations, working set size {working_set}, kkt residual {residual:e}")]
    NoConvergence {
        iterations: usize,
        working_set: usize,
        residual: f64,
    },
}

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no interior nodes satisfy d(x) >= {margin}")]
    EmptyCompact { margin: f64 },

    #[error("h evaluated outside its domain at s = {s}")]
    Domain { s: f64 },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    Eigen { iterations: usize },

    #[error("non-finite value in iterate {iteration}")]
    NonFinite { iteration: usize },

    #[error("invalid sandwich: sub exceeds super by {excess:e} at node {node}")]
    InvertedSandwich { node: usize, excess: f64 },

    #[error("sub-solution is not positive at node {node} (value {value:e})")]
    NonPositiveSub { node: usize, value: f64 },

    #[error("solution leaves the sandwich by {breach:e} at node {node}")]
    SandwichBreach { node: usize, breach: f64 },

    #[error("input solution did not converge")]
    Unconverged,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

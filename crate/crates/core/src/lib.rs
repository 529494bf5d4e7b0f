//! Finite-difference solver for the singular semilinear Dirichlet problem
//!
//! ```text
//! -Δu = f(x) h(u) + μ   in Ω = (0,1)^N,   u = 0 on ∂Ω,
//! ```
//!
//! where `h` blows up at `0` and `μ` is a nonnegative Radon measure. Solutions
//! are obtained as limits of regularized problems with truncated data.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod measures;
pub mod mesh;
pub mod singularity;
pub mod solver;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use measures::{mollify, Atom, DiscretizedMeasure, RadonMeasure};
pub use mesh::{build_laplacian, DiscreteOperator, Grid, GridFunction};
pub use singularity::{Envelope, Kind, SingularNonlinearity};
pub use solver::{
    InitialGuess, ProblemSpec, RegularizedProblem, SequenceResult, SolveResult, SolverConfig,
};

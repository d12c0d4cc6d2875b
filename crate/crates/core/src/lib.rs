//! Approximation of a matrix on a subset of its entries under spectral
//! constraints, and parameter-free matrix completion built on top of it.
//!
//! The building blocks are exact projections onto constraint sets
//! ([`projections`]), a masked projected gradient iteration ([`solver`]) and
//! a bisection over the constraint radius ([`completion`]).

pub mod cli;
pub mod completion;
pub mod constraint;
pub mod error;
pub mod io;
pub mod matrix;
pub mod projections;
pub mod solver;

pub use completion::{complete, completable_norm_bound, CompletionConfig, CompletionNorm, CompletionResult};
pub use constraint::Constraint;
pub use error::{Error, Result};
pub use matrix::{apply_mask, norm, svd, DenseMatrix, NormKind, ObservationSet, SvdFactors};
pub use projections::{project, ProjectionResult};
pub use solver::{solve_approximation, ApproximationSolution, IterationTrace, SolverConfig, StepMode};

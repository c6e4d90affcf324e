//! Sparse symmetric solves with point equality constraints.
//!
//! Two constrained paths are provided:
//!
//! - [`substitution_solve`] / [`SubstitutionSolver`]: eliminate constrained
//!   rows and columns and solve the free block. Any change to the
//!   constrained set needs a new factorization.
//! - [`UpdatingSolver`]: factor `A + eps I` once, keep `Q = (A + eps I)^-1 H^T`
//!   column by column, and per solve eliminate the Lagrange multipliers with
//!   a small dense `n_d x n_d` system. Adding a constraint costs one
//!   back-substitution, removing one costs nothing.

mod constrained;
mod factor;
mod sparse;

pub use constrained::{regularize, substitution_solve, ConstraintSet, SubstitutionSolver, UpdatingSolver};
pub use factor::{factorize, factorize_with, Backend, DenseCholesky, Factorization, SparseCholesky};
pub use sparse::SparseSym;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("non-finite matrix entry in row {row}")]
    NonFinite { row: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("constrained system is singular")]
    SingularSystem,
    #[error("dense constraint block is singular")]
    SingularConstraintBlock,
    #[error("vertex {0} is already constrained")]
    DuplicateConstraint(usize),
    #[error("vertex {0} is not constrained")]
    NotConstrained(usize),
    #[error("vertex {vertex} is out of range for {count} vertices")]
    VertexOutOfRange { vertex: usize, count: usize },
    #[error("at least one constraint is required")]
    NoConstraints,
    #[error("factorization backend failed: {0}")]
    Backend(String),
}

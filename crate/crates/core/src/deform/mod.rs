//! The smooth ARAP energy and its local-global minimization.
//!
//! Energy, with `lambda` in `[0, 1)`:
//!
//! ```text
//! E        = (1 - lambda) E_arap + lambda E_smooth
//! E_arap   = sum_v sum_{e in N(v)} w_e / 6 |e' - R_v e|^2
//! E_smooth = sum_v A_v |l'_v - R_v l_v|^2
//! ```
//!
//! `N(v)` is the spokes-and-rims neighborhood of `v`, `w_e` the cotan of the
//! angle opposite half-edge `e`, and `l_v` the row of `M^-1 L V`. With this
//! scaling the stationarity condition for fixed rotations is
//! `(lambda L M^-1 L + (1 - lambda) L) V' = lambda L rho + (1 - lambda) b`
//! with `rho_v = R_v l_v`, and the gradient of `E` is `2 (A V' - rhs)`.

mod energy;
mod init;
mod params;
mod rotation;
mod solver;
mod system;

pub use energy::{energy_arap, energy_smooth, energy_smooth_matrix, energy_total, evaluate_energies, Energies};
pub use init::initialize;
pub use params::{ConstraintMode, DeformParams, Initialization, RotationFit};
pub use rotation::{
    covariance_edge_only, covariance_full, fit_rotation_edge_only, fit_rotation_full, local_step, procrustes,
    RotationField,
};
pub use solver::{deform, deform_from, DeformResult, Deformer, IterationReport, TraceRow};
pub use system::{arap_rhs, assemble_rhs, assemble_system_matrix, rotated_laplacians};

use thiserror::Error;

use crate::linear::SolverError;
use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum DeformError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("energy became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error("previous positions requested but none were given")]
    NoPreviousPositions,
}

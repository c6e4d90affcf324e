//! Smooth as-rigid-as-possible (ARAP) surface deformation.
//!
//! The classical spokes-and-rims ARAP energy is blended with a rigidity term
//! on the area-normalized cotan Laplacian vectors. The blend weight `lambda`
//! raises the order of the global-step PDE (Laplacian to bi-Laplacian), which
//! removes the spikes ARAP produces at single-vertex handles while keeping the
//! cheap local-global iteration.
//!
//! Crate layout:
//!
//! - [`mesh`]: triangle meshes, OBJ/OFF IO, half-edge connectivity, discrete
//!   operators (cotan weights, lumped mass, cotan Laplacian) and generated
//!   test meshes.
//! - [`linear`]: symmetric sparse matrices, pluggable factorizations, and
//!   equality-constrained solves by substitution or by a regularized KKT
//!   scheme that adds and removes point constraints without refactorizing.
//! - [`deform`]: the energy, rotation fitting, system assembly,
//!   initializations and the local-global loop.
//! - [`session`]: the JSON message protocol and the interactive session state
//!   machine behind `smooth-arap serve`.
//! - [`harness`]: batch job configs, benchmark and energy-trace runners, and
//!   the canned deformation scenarios they share.

pub mod deform;
pub mod geometry;
pub mod harness;
pub mod linear;
pub mod mesh;
pub mod session;

pub use deform::{
    deform, ConstraintMode, DeformError, DeformParams, DeformResult, Deformer, Energies, Initialization, RotationFit,
};
pub use linear::{ConstraintSet, SolverError, SparseSym};
pub use mesh::{DiscreteOperators, HalfEdgeMesh, MeshError, MeshFormat, MeshGenerator, TriangleMesh};

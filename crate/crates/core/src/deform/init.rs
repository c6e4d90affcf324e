use nalgebra::Vector3;

use super::{DeformError, Initialization};
use crate::geometry::{from_matrix, to_matrix};
use crate::linear::{substitution_solve, ConstraintSet, SolverError, SparseSym};
use crate::mesh::DiscreteOperators;

fn snapped(positions: &[Vector3<f64>], constraints: &ConstraintSet) -> Vec<Vector3<f64>> {
    let mut out = positions.to_vec();
    for (v, t) in constraints.iter() {
        out[v] = t;
    }
    out
}

fn reproduce(
    a: &SparseSym,
    rest: &[Vector3<f64>],
    constraints: &ConstraintSet,
) -> Result<Vec<Vector3<f64>>, DeformError> {
    // Both operators annihilate constants; rounding can still let the
    // factorization through, so reject the unconstrained case up front.
    if constraints.is_empty() {
        return Err(SolverError::SingularSystem.into());
    }
    let v = to_matrix(rest);
    let rhs = a.mul_dense(&v);
    Ok(from_matrix(&substitution_solve(a, &rhs, constraints)?))
}

/// Starting positions for the local-global loop. The Poisson and
/// bi-Laplacian solves are unregularized, so they need at least one
/// constraint per connected component.
pub fn initialize(
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    constraints: &ConstraintSet,
    mode: Initialization,
    previous: Option<&[Vector3<f64>]>,
) -> Result<Vec<Vector3<f64>>, DeformError> {
    constraints.check_range(rest.len())?;
    match mode {
        Initialization::OriginalMesh => Ok(snapped(rest, constraints)),
        Initialization::Previous => {
            let previous = previous.ok_or(DeformError::NoPreviousPositions)?;
            Ok(snapped(previous, constraints))
        }
        Initialization::Poisson => reproduce(&ops.laplacian, rest, constraints),
        Initialization::BiLaplacian => {
            let bilaplacian = ops.laplacian.weighted_gram(&ops.inverse_areas());
            reproduce(&bilaplacian, rest, constraints)
        }
    }
}

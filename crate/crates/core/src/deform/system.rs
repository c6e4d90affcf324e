use nalgebra::{DMatrix, Vector3};

use super::RotationField;
use crate::linear::SparseSym;
use crate::mesh::{DiscreteOperators, HalfEdgeMesh};

/// `lambda L^T M^-1 L + (1 - lambda) L`.
pub fn assemble_system_matrix(ops: &DiscreteOperators, lambda: f64) -> SparseSym {
    if lambda == 0.0 {
        return ops.laplacian.clone();
    }
    let bilaplacian = ops.laplacian.weighted_gram(&ops.inverse_areas());
    bilaplacian.linear_combination(lambda, &ops.laplacian, 1.0 - lambda)
}

/// `b_p = sum_v sum_{e in N(v)} d_e^p w_e / 6 R_v e`, with `d = +1` at the
/// target of `e` and `-1` at its origin.
///
/// Each half-edge lies in the neighborhoods of exactly the three corners of
/// its triangle, so the sum runs per face.
pub fn arap_rhs(
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    rotations: &RotationField,
) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(mesh.num_vertices(), 3);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let r = rotations[tri[0]] + rotations[tri[1]] + rotations[tri[2]];
        for h in mesh.face_halfedges(t) {
            let c = ops.weight(h) / 6.0 * (r * mesh.vector(h, rest));
            let (o, d) = (mesh.origin(h), mesh.target(h));
            for k in 0..3 {
                b[(d, k)] += c[k];
                b[(o, k)] -= c[k];
            }
        }
    }
    b
}

/// Rows `(R_v l_v)^T`.
pub fn rotated_laplacians(rest_laplacians: &[Vector3<f64>], rotations: &RotationField) -> DMatrix<f64> {
    let mut rho = DMatrix::zeros(rest_laplacians.len(), 3);
    for (v, l) in rest_laplacians.iter().enumerate() {
        rho.row_mut(v).copy_from(&(rotations[v] * l).transpose());
    }
    rho
}

/// `lambda L rho + (1 - lambda) b`.
pub fn assemble_rhs(
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    rest_laplacians: &[Vector3<f64>],
    rotations: &RotationField,
    lambda: f64,
) -> DMatrix<f64> {
    let mut rhs = arap_rhs(mesh, ops, rest, rotations) * (1.0 - lambda);
    if lambda != 0.0 {
        let rho = rotated_laplacians(rest_laplacians, rotations);
        rhs += ops.laplacian.mul_dense(&rho) * lambda;
    }
    rhs
}

use std::ops::Index;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::RotationFit;
use crate::mesh::{DiscreteOperators, HalfEdgeMesh};

/// Relative size below which the middle singular value marks `S` as rank
/// deficient.
const DEGENERATE_RATIO: f64 = 1e-12;

/// One rotation per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationField(pub Vec<Matrix3<f64>>);

impl RotationField {
    pub fn identity(n: usize) -> Self {
        Self(vec![Matrix3::identity(); n])
    }

    pub fn uniform(n: usize, r: Matrix3<f64>) -> Self {
        Self(vec![r; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Matrix3<f64>> {
        self.0.iter()
    }

    /// Every entry orthonormal with determinant `+1` within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        self.0.iter().all(|r| crate::geometry::is_rotation(r, tol))
    }
}

impl Index<usize> for RotationField {
    type Output = Matrix3<f64>;

    fn index(&self, v: usize) -> &Matrix3<f64> {
        &self.0[v]
    }
}

/// Proper rotation `R` maximizing `tr(R S)`. `None` when `S` has rank below 2.
pub fn procrustes(s: &Matrix3<f64>) -> Option<Matrix3<f64>> {
    if !s.iter().all(|x| x.is_finite()) {
        return None;
    }
    let svd = s.svd(true, true);
    let u = svd.u?;
    let w = svd.v_t?.transpose();
    let sigma = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
    let (max, mid, min) = (sigma[order[0]], sigma[order[1]], order[2]);
    if max.is_nan() || max <= 0.0 || mid <= DEGENERATE_RATIO * max {
        return None;
    }
    let mut u = u;
    if (w * u.transpose()).determinant() < 0.0 {
        u.column_mut(min).neg_mut();
    }
    Some(w * u.transpose())
}

/// `sum w_e e e'^T` over the spokes-and-rims of `v`.
pub fn covariance_edge_only(
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    deformed: &[Vector3<f64>],
    v: usize,
) -> Matrix3<f64> {
    let mut s = Matrix3::zeros();
    for h in mesh.spokes_and_rims(v) {
        let e = mesh.vector(h, rest);
        let e2 = mesh.vector(h, deformed);
        s += ops.weight(h) * e * e2.transpose();
    }
    s
}

/// `(1 - lambda) sum w_e / 6 e e'^T + lambda A_v l_v l'_v^T`.
#[allow(clippy::too_many_arguments)]
pub fn covariance_full(
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    deformed: &[Vector3<f64>],
    rest_laplacian: &Vector3<f64>,
    deformed_laplacian: &Vector3<f64>,
    v: usize,
    lambda: f64,
) -> Matrix3<f64> {
    let edges = covariance_edge_only(mesh, ops, rest, deformed, v) / 6.0;
    (1.0 - lambda) * edges + lambda * ops.areas[v] * rest_laplacian * deformed_laplacian.transpose()
}

/// `sum w_e e e'^T` over the three half-edges of each triangle.
fn face_covariances(
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    deformed: &[Vector3<f64>],
) -> Vec<Matrix3<f64>> {
    (0..mesh.num_faces())
        .into_par_iter()
        .map(|t| {
            let mut s = Matrix3::zeros();
            for h in mesh.face_halfedges(t) {
                s += ops.weight(h) * mesh.vector(h, rest) * mesh.vector(h, deformed).transpose();
            }
            s
        })
        .collect()
}

fn fit_or_identity(s: &Matrix3<f64>, v: usize) -> (Matrix3<f64>, bool) {
    match procrustes(s) {
        Some(r) => (r, false),
        None => {
            log::debug!("rank-deficient covariance at vertex {v}; using identity");
            (Matrix3::identity(), true)
        }
    }
}

pub fn fit_rotation_edge_only(
    v: usize,
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    deformed: &[Vector3<f64>],
) -> Matrix3<f64> {
    fit_or_identity(&covariance_edge_only(mesh, ops, rest, deformed, v), v).0
}

pub fn fit_rotation_full(
    v: usize,
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    deformed: &[Vector3<f64>],
    lambda: f64,
) -> Matrix3<f64> {
    let l = ops.laplacian_vector(mesh, rest, v);
    let l2 = ops.laplacian_vector(mesh, deformed, v);
    fit_or_identity(&covariance_full(mesh, ops, rest, deformed, &l, &l2, v, lambda), v).0
}

/// Fits every vertex independently in parallel. Returns the field and the
/// number of vertices that fell back to the identity.
pub fn local_step(
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    rest_laplacians: &[Vector3<f64>],
    deformed: &[Vector3<f64>],
    fit: RotationFit,
    lambda: f64,
) -> (RotationField, usize) {
    let deformed_laplacians = match fit {
        RotationFit::Full => ops.laplacian_vectors(deformed),
        RotationFit::EdgeOnly => Vec::new(),
    };
    // A vertex's spokes and rims are exactly the half-edges of its incident
    // triangles, so per-face sums are shared by all three corners.
    let faces = face_covariances(mesh, ops, rest, deformed);
    let fitted: Vec<(Matrix3<f64>, bool)> = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|v| {
            let edges: Matrix3<f64> = mesh.incident_faces(v).iter().map(|&t| faces[t]).sum();
            let s = match fit {
                RotationFit::EdgeOnly => edges,
                RotationFit::Full => {
                    (1.0 - lambda) / 6.0 * edges
                        + lambda * ops.areas[v] * rest_laplacians[v] * deformed_laplacians[v].transpose()
                }
            };
            fit_or_identity(&s, v)
        })
        .collect();
    let degenerate = fitted.iter().filter(|(_, d)| *d).count();
    if degenerate > 0 {
        log::warn!("{degenerate} vertices had rank-deficient covariances");
    }
    (RotationField(fitted.into_iter().map(|(r, _)| r).collect()), degenerate)
}

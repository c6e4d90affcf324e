use nalgebra::{DMatrix, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RotationField;
use crate::mesh::{DiscreteOperators, HalfEdgeMesh};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Energies {
    pub total: f64,
    pub arap: f64,
    pub smooth: f64,
}

impl Energies {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.arap.is_finite() && self.smooth.is_finite()
    }
}

// Per-vertex terms are summed in index order so results do not depend on
// how rayon splits the work.
fn ordered_sum(terms: Vec<f64>) -> f64 {
    terms.into_iter().sum()
}

/// `sum_v sum_{e in N(v)} w_e / 6 |e' - R_v e|^2`.
///
/// Evaluated per triangle: each of its half-edges belongs to the
/// neighborhoods of its three corners.
pub fn energy_arap(
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    deformed: &[Vector3<f64>],
    rotations: &RotationField,
) -> f64 {
    let terms = (0..mesh.num_faces())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangles()[t];
            let mut sum = 0.0;
            for h in mesh.face_halfedges(t) {
                let e = mesh.vector(h, rest);
                let e2 = mesh.vector(h, deformed);
                let corners: f64 = tri.iter().map(|&v| (e2 - rotations[v] * e).norm_squared()).sum();
                sum += ops.weight(h) / 6.0 * corners;
            }
            sum
        })
        .collect();
    ordered_sum(terms)
}

/// `sum_v A_v |l'_v - R_v l_v|^2`, evaluated per vertex from the half-edges.
pub fn energy_smooth(
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest_laplacians: &[Vector3<f64>],
    deformed: &[Vector3<f64>],
    rotations: &RotationField,
) -> f64 {
    let terms = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|v| {
            let l = ops.laplacian_vector(mesh, deformed, v);
            ops.areas[v] * (l - rotations[v] * rest_laplacians[v]).norm_squared()
        })
        .collect();
    ordered_sum(terms)
}

/// `|M^-1 L V' - rho|^2_M` with `rho` the stacked rotated rest Laplacians.
pub fn energy_smooth_matrix(ops: &DiscreteOperators, deformed: &DMatrix<f64>, rho: &DMatrix<f64>) -> f64 {
    let lv = ops.laplacian.mul_dense(deformed);
    let mut sum = 0.0;
    for v in 0..ops.num_vertices() {
        let a = ops.areas[v];
        let d = lv.row(v) / a - rho.row(v);
        sum += a * d.norm_squared();
    }
    sum
}

pub fn energy_total(lambda: f64, arap: f64, smooth: f64) -> f64 {
    (1.0 - lambda) * arap + lambda * smooth
}

pub fn evaluate_energies(
    mesh: &HalfEdgeMesh,
    ops: &DiscreteOperators,
    rest: &[Vector3<f64>],
    rest_laplacians: &[Vector3<f64>],
    deformed: &[Vector3<f64>],
    rotations: &RotationField,
    lambda: f64,
) -> Energies {
    let arap = energy_arap(mesh, ops, rest, deformed, rotations);
    let smooth = ordered_sum(
        ops.laplacian_vectors(deformed)
            .iter()
            .enumerate()
            .map(|(v, l)| ops.areas[v] * (l - rotations[v] * rest_laplacians[v]).norm_squared())
            .collect(),
    );
    Energies {
        total: energy_total(lambda, arap, smooth),
        arap,
        smooth,
    }
}

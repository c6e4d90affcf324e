//! Cotan weights, lumped vertex areas and the cotan Laplacian.
//!
//! Sign convention: `L` has a positive diagonal and `L_uv = -(cot a + cot b)/2`
//! for each edge, so row `v` of `M^-1 L X` is the area-normalized Laplacian
//! vector of `X` at `v` (the sum of `w_e / (2 A_v)` times the incident edge
//! vectors pointing into `v`).

use nalgebra::{DMatrix, Vector3};

use super::{HalfEdge, HalfEdgeMesh, MeshError};
use crate::linear::SparseSym;

/// Relative triangle-area threshold, scaled by the squared bbox diagonal.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Cotangent of the angle at `opposite` in triangle `(from, to, opposite)`.
pub fn cot_opposite(from: Vector3<f64>, to: Vector3<f64>, opposite: Vector3<f64>) -> f64 {
    let a = from - opposite;
    let b = to - opposite;
    a.dot(&b) / a.cross(&b).norm()
}

fn area_floor(mesh: &HalfEdgeMesh) -> f64 {
    DEGENERATE_AREA * mesh.mesh().bbox_diagonal().powi(2)
}

fn check_area(mesh: &HalfEdgeMesh, t: usize, floor: f64) -> Result<f64, MeshError> {
    let area = mesh.mesh().triangle_area(t);
    if area.is_nan() || area < floor || area == 0.0 {
        return Err(MeshError::DegenerateTriangle { triangle: t, area });
    }
    Ok(area)
}

/// `cot` of the angle opposite `h` in its triangle. Not clamped; obtuse
/// angles give negative weights.
pub fn cotan_weight(mesh: &HalfEdgeMesh, h: HalfEdge) -> Result<f64, MeshError> {
    check_area(mesh, h.face(), area_floor(mesh))?;
    let p = mesh.positions();
    Ok(cot_opposite(
        p[mesh.origin(h)],
        p[mesh.target(h)],
        p[mesh.opposite_vertex(h)],
    ))
}

/// Barycentric lumped areas: each triangle gives a third of its area to each
/// corner.
pub fn vertex_areas(mesh: &HalfEdgeMesh) -> Result<Vec<f64>, MeshError> {
    let floor = area_floor(mesh);
    let mut areas = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = check_area(mesh, t, floor)? / 3.0;
        for &v in tri {
            areas[v] += third;
        }
    }
    Ok(areas)
}

#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    /// `cot` of the opposite angle, one per half-edge.
    pub weights: Vec<f64>,
    /// Diagonal of the lumped mass matrix `M`.
    pub areas: Vec<f64>,
    pub laplacian: SparseSym,
    /// Half-edges whose opposite angle is obtuse.
    pub negative_weights: usize,
}

impl DiscreteOperators {
    pub fn assemble(mesh: &HalfEdgeMesh) -> Result<Self, MeshError> {
        let n = mesh.num_vertices();
        let areas = vertex_areas(mesh)?;
        if let Some(v) = areas.iter().position(|&a| a <= 0.0) {
            return Err(MeshError::InvalidParam(format!("vertex {v} belongs to no triangle")));
        }
        let p = mesh.positions();
        let weights: Vec<f64> = mesh
            .halfedges()
            .map(|h| cot_opposite(p[mesh.origin(h)], p[mesh.target(h)], p[mesh.opposite_vertex(h)]))
            .collect();
        let negative_weights = weights.iter().filter(|&&w| w < 0.0).count();
        if negative_weights > 0 {
            log::debug!("{negative_weights} half-edges have negative cotan weights");
        }

        // Each half-edge contributes w/2 to its edge; both (u, v) and (v, u)
        // receive the same value so the result is exactly symmetric.
        let mut triplets = Vec::with_capacity(4 * weights.len());
        for h in mesh.halfedges() {
            let (u, v) = (mesh.origin(h), mesh.target(h));
            let c = 0.5 * weights[h.index()];
            triplets.push((u, v, -c));
            triplets.push((v, u, -c));
            triplets.push((u, u, c));
            triplets.push((v, v, c));
        }
        let laplacian = SparseSym::from_triplets(n, triplets).map_err(|e| MeshError::InvalidParam(e.to_string()))?;

        Ok(Self {
            weights,
            areas,
            laplacian,
            negative_weights,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.areas.len()
    }

    pub fn weight(&self, h: HalfEdge) -> f64 {
        self.weights[h.index()]
    }

    pub fn inverse_areas(&self) -> Vec<f64> {
        self.areas.iter().map(|a| 1.0 / a).collect()
    }

    /// Rows of `M^-1 L X`.
    pub fn laplacian_vectors(&self, positions: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
        let lx = self.laplacian.mul_dense(&crate::geometry::to_matrix(positions));
        (0..positions.len())
            .map(|v| Vector3::new(lx[(v, 0)], lx[(v, 1)], lx[(v, 2)]) / self.areas[v])
            .collect()
    }

    /// Direct half-edge evaluation of the Laplacian vector at `v`:
    /// `sum over half-edges e touching v of w_e / (2 A_v) * d * e`, with
    /// `d = +1` when `e` points into `v` and `-1` when it leaves `v`.
    pub fn laplacian_vector(&self, mesh: &HalfEdgeMesh, positions: &[Vector3<f64>], v: usize) -> Vector3<f64> {
        let scale = 1.0 / (2.0 * self.areas[v]);
        mesh.halfedges_at(v)
            .map(|h| {
                let d = if mesh.target(h) == v { 1.0 } else { -1.0 };
                self.weight(h) * scale * d * mesh.vector(h, positions)
            })
            .sum()
    }

    /// `|l_v|` per vertex, the (doubled) discrete mean curvature magnitude.
    pub fn mean_curvature_magnitudes(&self, positions: &[Vector3<f64>]) -> Vec<f64> {
        self.laplacian_vectors(positions).iter().map(|l| l.norm()).collect()
    }

    pub fn mass_dense(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&self.areas))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{make_test_mesh, MeshGenerator, TriangleMesh};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tri(points: [[f64; 3]; 3]) -> HalfEdgeMesh {
        HalfEdgeMesh::new(TriangleMesh::new(points.map(Vector3::from).to_vec(), vec![[0, 1, 2]]).unwrap()).unwrap()
    }

    #[test]
    fn equilateral_cotangent() {
        let he = tri([[0., 0., 0.], [1., 0., 0.], [0.5, 3f64.sqrt() / 2.0, 0.]]);
        for h in he.halfedges() {
            assert_relative_eq!(cotan_weight(&he, h).unwrap(), 1.0 / 3f64.sqrt(), epsilon = 1e-14);
        }
    }

    #[test]
    fn right_and_obtuse_angles() {
        // Right angle at vertex 2, opposite half-edge 0 (0 -> 1).
        let he = tri([[1., 0., 0.], [0., 1., 0.], [0., 0., 0.]]);
        assert!(cotan_weight(&he, HalfEdge(0)).unwrap().abs() < 1e-15);

        // 120 degrees at vertex 2.
        let a = 2.0 * std::f64::consts::PI / 3.0;
        let he = tri([[1., 0., 0.], [a.cos(), a.sin(), 0.], [0., 0., 0.]]);
        assert_relative_eq!(
            cotan_weight(&he, HalfEdge(0)).unwrap(),
            -1.0 / 3f64.sqrt(),
            epsilon = 1e-14
        );
        assert_eq!(DiscreteOperators::assemble(&he).unwrap().negative_weights, 1);
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let he = tri([[0., 0., 0.], [1., 0., 0.], [2., 0., 0.]]);
        assert!(matches!(
            cotan_weight(&he, HalfEdge(0)),
            Err(MeshError::DegenerateTriangle { .. })
        ));
        assert!(matches!(
            DiscreteOperators::assemble(&he),
            Err(MeshError::DegenerateTriangle { .. })
        ));
    }

    #[test]
    fn unit_square_areas() {
        let he = HalfEdgeMesh::new(make_test_mesh(&MeshGenerator::grid_plane(2)).unwrap()).unwrap();
        let areas = vertex_areas(&he).unwrap();
        assert_relative_eq!(areas.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn interior_grid_area_equals_cell_area() {
        let res = 6;
        let he = HalfEdgeMesh::new(make_test_mesh(&MeshGenerator::grid_plane(res)).unwrap()).unwrap();
        let cell = (1.0 / (res - 1) as f64).powi(2);
        let areas = vertex_areas(&he).unwrap();
        let interior = 2 * res + 2;
        assert_relative_eq!(areas[interior], cell, epsilon = 1e-15);
    }

    #[test]
    fn flat_grid_interior_laplacian_vanishes() {
        let he = HalfEdgeMesh::new(make_test_mesh(&MeshGenerator::grid_plane(7)).unwrap()).unwrap();
        let ops = DiscreteOperators::assemble(&he).unwrap();
        let lv = ops.laplacian_vectors(he.positions());
        for (v, l) in lv.iter().enumerate() {
            if !he.is_boundary_vertex(v) {
                assert!(l.norm() < 1e-10, "vertex {v}: {l}");
            }
        }
    }

    fn random_meshes() -> Vec<HalfEdgeMesh> {
        [
            MeshGenerator::bumpy_plane(9, 3, 7),
            MeshGenerator::bumpy_cylinder(12, 8, 4, 3),
            MeshGenerator::bar(3),
            MeshGenerator::spiky_plane(11),
        ]
        .iter()
        .map(|g| HalfEdgeMesh::new(make_test_mesh(g).unwrap()).unwrap())
        .collect()
    }

    #[test]
    fn laplacian_structure() {
        for he in random_meshes() {
            let ops = DiscreteOperators::assemble(&he).unwrap();
            let l = &ops.laplacian;
            assert!(l.is_symmetric());
            let scale = l.max_abs();
            assert!(l.row_sums().iter().all(|s| s.abs() <= 1e-12 * scale));
            assert!(ops.areas.iter().all(|&a| a > 0.0));
            let total: f64 = ops.areas.iter().sum();
            assert_relative_eq!(total, he.mesh().total_area(), max_relative = 1e-12);
        }
    }

    #[test]
    fn matrix_rows_match_direct_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        for he in random_meshes() {
            let ops = DiscreteOperators::assemble(&he).unwrap();
            // arbitrary X, not just the rest positions
            let x: Vec<Vector3<f64>> = he
                .positions()
                .iter()
                .map(|p| p + Vector3::new(rng.random(), rng.random(), rng.random()) * 0.1)
                .collect();
            let rows = ops.laplacian_vectors(&x);
            for _ in 0..25 {
                let v = rng.random_range(0..he.num_vertices());
                let direct = ops.laplacian_vector(&he, &x, v);
                let scale = rows[v].norm().max(direct.norm()).max(1e-300);
                assert!((direct - rows[v]).norm() <= 1e-10 * scale.max(1.0), "vertex {v}");
                checked += 1;
            }
        }
        assert_eq!(checked, 100);
    }

    #[test]
    fn laplacian_vector_translation_and_scale() {
        let he = &random_meshes()[0];
        let ops = DiscreteOperators::assemble(he).unwrap();
        let v = 40;
        let base = ops.laplacian_vector(he, he.positions(), v);
        let shifted: Vec<_> = he
            .positions()
            .iter()
            .map(|p| p + Vector3::new(3.0, -2.0, 1.0))
            .collect();
        assert_relative_eq!(ops.laplacian_vector(he, &shifted, v), base, epsilon = 1e-12);

        // scale the geometry itself: weights are scale free, areas scale by s^2
        let s = 2.5;
        let scaled_mesh = HalfEdgeMesh::new(
            TriangleMesh::new(he.positions().iter().map(|p| p * s).collect(), he.triangles().to_vec()).unwrap(),
        )
        .unwrap();
        let scaled_ops = DiscreteOperators::assemble(&scaled_mesh).unwrap();
        let scaled = scaled_ops.laplacian_vector(&scaled_mesh, scaled_mesh.positions(), v);
        assert_relative_eq!(scaled, base / s, max_relative = 1e-12, epsilon = 1e-14);
    }
}

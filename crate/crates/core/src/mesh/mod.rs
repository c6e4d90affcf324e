//! Triangle meshes and the discrete differential operators built on them.

mod generate;
mod halfedge;
mod io;
mod operators;

pub use generate::{make_test_mesh, MeshGenerator, MeshKind};
pub use halfedge::{HalfEdge, HalfEdgeMesh};
pub use io::{load_mesh, read_obj, read_off, read_path, save_mesh, write_obj, write_off, MeshFormat};
pub use operators::{cot_opposite, cotan_weight, vertex_areas, DiscreteOperators};

use nalgebra::Vector3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {triangle} references vertex {index}, mesh has {count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        count: usize,
    },
    #[error("triangle {triangle} repeats a vertex index")]
    RepeatedVertex { triangle: usize },
    #[error("edge ({0}, {1}) borders more than two triangles")]
    NonManifold(usize, usize),
    #[error("edge ({0}, {1}) is traversed in the same direction by two triangles")]
    InconsistentOrientation(usize, usize),
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Vertex positions plus counterclockwise vertex-index triples.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    pub positions: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, checking index ranges and repeated indices. Manifoldness
    /// is checked when the half-edge structure is built.
    pub fn new(positions: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let count = positions.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= count) {
                return Err(MeshError::IndexOutOfRange {
                    triangle: t,
                    index,
                    count,
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex { triangle: t });
            }
        }
        Ok(Self { positions, triangles })
    }

    pub fn num_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounding_box(&self) -> (Vector3<f64>, Vector3<f64>) {
        crate::geometry::bounding_box(&self.positions)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.positions[i]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }
}

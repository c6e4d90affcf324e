use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::axis_angle;
use crate::linear::ConstraintSet;
use crate::mesh::{make_test_mesh, HalfEdgeMesh, MeshGenerator};

/// Canned deformation problems on generated meshes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Tube with its bottom ring fixed and its top ring twisted and shifted.
    BumpyCylinder,
    /// Box bar with one end fixed and the other twisted by 135 degrees about
    /// the long axis.
    Bar,
    /// Bumpy plane, boundary fixed, center vertex pulled up by 0.3 bbox.
    BumpyPlaneSpike,
    /// Spiky plane, boundary fixed, center vertex pulled up.
    SpikyPlane,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::BumpyCylinder,
        Preset::Bar,
        Preset::BumpyPlaneSpike,
        Preset::SpikyPlane,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::BumpyCylinder => "bumpy-cylinder",
            Preset::Bar => "bar",
            Preset::BumpyPlaneSpike => "bumpy-plane-spike",
            Preset::SpikyPlane => "spiky-plane",
        }
    }

    /// Default mesh for the preset.
    pub fn generator(self) -> MeshGenerator {
        match self {
            Preset::BumpyCylinder => MeshGenerator::bumpy_cylinder(40, 60, 10, 7),
            Preset::Bar => MeshGenerator::bar(4),
            Preset::BumpyPlaneSpike => MeshGenerator::bumpy_plane(41, 10, 3),
            Preset::SpikyPlane => MeshGenerator::spiky_plane(33),
        }
    }

    pub fn build(self) -> Result<Problem, HarnessError> {
        self.build_with(&self.generator())
    }

    /// Applies the preset's handle rule to another mesh of the same kind.
    pub fn build_with(self, generator: &MeshGenerator) -> Result<Problem, HarnessError> {
        let mesh = HalfEdgeMesh::new(make_test_mesh(generator)?)?;
        let constraints = self.constraints(&mesh)?;
        Ok(Problem {
            name: self.name().to_string(),
            mesh,
            constraints,
        })
    }

    pub fn constraints(self, mesh: &HalfEdgeMesh) -> Result<ConstraintSet, HarnessError> {
        let p = mesh.positions();
        let (lo, hi) = mesh.mesh().bounding_box();
        let diag = (hi - lo).norm();
        let eps = 1e-9 * diag;
        let mut set = ConstraintSet::new();
        match self {
            Preset::BumpyCylinder => {
                let top_center = Vector3::new(0.0, 0.0, hi.z);
                let twist = axis_angle(Vector3::z(), FRAC_PI_2);
                let shift = Vector3::new(0.25 * (hi.z - lo.z), 0.0, 0.0);
                for (v, x) in p.iter().enumerate() {
                    if x.z <= lo.z + eps {
                        set.insert(v, *x)?;
                    } else if x.z >= hi.z - eps {
                        set.insert(v, twist * (x - top_center) + top_center + shift)?;
                    }
                }
            }
            Preset::Bar => {
                let end_center = Vector3::new(hi.x, 0.5 * (lo.y + hi.y), 0.5 * (lo.z + hi.z));
                let twist = axis_angle(Vector3::x(), 1.5 * FRAC_PI_2);
                for (v, x) in p.iter().enumerate() {
                    if x.x <= lo.x + eps {
                        set.insert(v, *x)?;
                    } else if x.x >= hi.x - eps {
                        set.insert(v, twist * (x - end_center) + end_center)?;
                    }
                }
            }
            Preset::BumpyPlaneSpike | Preset::SpikyPlane => {
                set = boundary_constraints(mesh);
                let center = nearest_vertex(mesh, &(0.5 * (lo + hi)));
                set.insert(center, p[center] + Vector3::new(0.0, 0.0, 0.3 * diag))?;
            }
        }
        if set.is_empty() {
            return Err(HarnessError::Config(format!(
                "preset {} selected no handles on this mesh",
                self.name()
            )));
        }
        Ok(set)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
            format!("unknown preset {s:?}; expected one of {}", names.join(", "))
        })
    }
}

/// A mesh together with its handles.
#[derive(Debug, Clone)]
pub struct Problem {
    pub name: String,
    pub mesh: HalfEdgeMesh,
    pub constraints: ConstraintSet,
}

/// Every boundary vertex pinned at its rest position.
pub fn boundary_constraints(mesh: &HalfEdgeMesh) -> ConstraintSet {
    let p = mesh.positions();
    ConstraintSet::from_pairs(mesh.boundary_vertices().into_iter().map(|v| (v, p[v])))
        .expect("boundary vertices are unique")
}

/// Closest vertex to `point`, lowest index on ties.
pub fn nearest_vertex(mesh: &HalfEdgeMesh, point: &Vector3<f64>) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (v, x) in mesh.positions().iter().enumerate() {
        let d = (x - point).norm_squared();
        if d < best.0 {
            best = (d, v);
        }
    }
    best.1
}

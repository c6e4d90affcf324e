//! Deterministic synthetic meshes used by tests, benchmarks and presets.

use std::collections::HashMap;
use std::f64::consts::TAU;

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{MeshError, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    GridPlane,
    BumpyPlane,
    BumpyCylinder,
    Bar,
    SpikyPlane,
}

/// Generator parameters, serialized as `{"kind": "...", ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshGenerator {
    /// `resolution x resolution` vertices on a `size x size` square in z = 0.
    GridPlane {
        resolution: usize,
        #[serde(default = "one")]
        size: f64,
    },
    /// Grid plane displaced along z by seeded Gaussian bumps.
    BumpyPlane {
        resolution: usize,
        #[serde(default = "one")]
        size: f64,
        #[serde(default = "default_bumps")]
        bumps: usize,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_bump_radius")]
        bump_radius: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Open tube around the z axis (boundary loops at both ends), with
    /// seeded radial Gaussian bumps.
    BumpyCylinder {
        around: usize,
        along: usize,
        #[serde(default = "half")]
        radius: f64,
        #[serde(default = "default_height")]
        height: f64,
        #[serde(default = "default_bumps")]
        bumps: usize,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_bump_radius")]
        bump_radius: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Closed box surface along x, `resolution` cells across the short side.
    Bar {
        resolution: usize,
        #[serde(default = "default_bar_length")]
        length: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default = "one")]
        thickness: f64,
    },
    /// Grid plane with single-vertex spikes along +z on a regular lattice.
    SpikyPlane {
        resolution: usize,
        #[serde(default = "one")]
        size: f64,
        #[serde(default = "default_spike_spacing")]
        spike_spacing: usize,
        #[serde(default = "default_spike_height")]
        spike_height: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_bumps() -> usize {
    8
}
fn default_amplitude() -> f64 {
    0.04
}
fn default_bump_radius() -> f64 {
    0.06
}
fn default_height() -> f64 {
    2.0
}
fn default_bar_length() -> f64 {
    5.0
}
fn default_spike_spacing() -> usize {
    4
}
fn default_spike_height() -> f64 {
    0.06
}

impl MeshGenerator {
    pub fn grid_plane(resolution: usize) -> Self {
        Self::GridPlane { resolution, size: 1.0 }
    }

    pub fn bumpy_plane(resolution: usize, bumps: usize, seed: u64) -> Self {
        Self::BumpyPlane {
            resolution,
            size: 1.0,
            bumps,
            amplitude: default_amplitude(),
            bump_radius: default_bump_radius(),
            seed,
        }
    }

    pub fn bumpy_cylinder(around: usize, along: usize, bumps: usize, seed: u64) -> Self {
        Self::BumpyCylinder {
            around,
            along,
            radius: 0.5,
            height: default_height(),
            bumps,
            amplitude: default_amplitude(),
            bump_radius: default_bump_radius() * 2.0,
            seed,
        }
    }

    pub fn bar(resolution: usize) -> Self {
        Self::Bar {
            resolution,
            length: default_bar_length(),
            width: 1.0,
            thickness: 1.0,
        }
    }

    pub fn spiky_plane(resolution: usize) -> Self {
        Self::SpikyPlane {
            resolution,
            size: 1.0,
            spike_spacing: default_spike_spacing(),
            spike_height: default_spike_height(),
        }
    }

    pub fn kind(&self) -> MeshKind {
        match self {
            Self::GridPlane { .. } => MeshKind::GridPlane,
            Self::BumpyPlane { .. } => MeshKind::BumpyPlane,
            Self::BumpyCylinder { .. } => MeshKind::BumpyCylinder,
            Self::Bar { .. } => MeshKind::Bar,
            Self::SpikyPlane { .. } => MeshKind::SpikyPlane,
        }
    }
}

pub fn make_test_mesh(generator: &MeshGenerator) -> Result<TriangleMesh, MeshError> {
    match *generator {
        MeshGenerator::GridPlane { resolution, size } => {
            check_resolution(resolution, 2)?;
            check_positive("size", size)?;
            Ok(plane(resolution, size, |_, _| 0.0))
        }
        MeshGenerator::BumpyPlane {
            resolution,
            size,
            bumps,
            amplitude,
            bump_radius,
            seed,
        } => {
            check_resolution(resolution, 2)?;
            check_positive("size", size)?;
            check_positive("bump_radius", bump_radius)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let centers: Vec<(Vector2<f64>, f64)> = (0..bumps)
                .map(|_| {
                    let c = Vector2::new(rng.random_range(0.15..0.85), rng.random_range(0.15..0.85)) * size;
                    (c, random_amplitude(&mut rng, amplitude))
                })
                .collect();
            let sigma = bump_radius * size;
            Ok(plane(resolution, size, |x, y| {
                let p = Vector2::new(x, y);
                centers
                    .iter()
                    .map(|(c, a)| a * (-(p - c).norm_squared() / (2.0 * sigma * sigma)).exp())
                    .sum()
            }))
        }
        MeshGenerator::BumpyCylinder {
            around,
            along,
            radius,
            height,
            bumps,
            amplitude,
            bump_radius,
            seed,
        } => {
            check_resolution(around, 3)?;
            check_resolution(along, 2)?;
            check_positive("radius", radius)?;
            check_positive("height", height)?;
            check_positive("bump_radius", bump_radius)?;
            if amplitude.abs() >= radius {
                return Err(MeshError::InvalidParam(
                    "bump amplitude must be below the radius".into(),
                ));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let centers: Vec<(f64, f64, f64)> = (0..bumps)
                .map(|_| {
                    (
                        rng.random_range(0.0..TAU),
                        rng.random_range(0.15..0.85) * height,
                        random_amplitude(&mut rng, amplitude),
                    )
                })
                .collect();
            let sigma = bump_radius;
            Ok(cylinder(around, along, radius, height, |theta, z| {
                centers
                    .iter()
                    .map(|&(ct, cz, a)| {
                        let mut dt = (theta - ct).rem_euclid(TAU);
                        if dt > TAU / 2.0 {
                            dt = TAU - dt;
                        }
                        let d2 = (radius * dt).powi(2) + (z - cz).powi(2);
                        a * (-d2 / (2.0 * sigma * sigma)).exp()
                    })
                    .sum()
            }))
        }
        MeshGenerator::Bar {
            resolution,
            length,
            width,
            thickness,
        } => {
            check_resolution(resolution, 1)?;
            for (name, v) in [("length", length), ("width", width), ("thickness", thickness)] {
                check_positive(name, v)?;
            }
            let short = width.min(thickness);
            let cells = |extent: f64| ((extent / short) * resolution as f64).round().max(1.0) as usize;
            Ok(box_surface(
                [cells(length), cells(width), cells(thickness)],
                Vector3::new(length, width, thickness),
            ))
        }
        MeshGenerator::SpikyPlane {
            resolution,
            size,
            spike_spacing,
            spike_height,
        } => {
            check_resolution(resolution, 2)?;
            check_positive("size", size)?;
            if spike_spacing < 2 {
                return Err(MeshError::InvalidParam("spike_spacing must be at least 2".into()));
            }
            let mut mesh = plane(resolution, size, |_, _| 0.0);
            let offset = spike_spacing / 2;
            for j in 1..resolution - 1 {
                for i in 1..resolution - 1 {
                    if i % spike_spacing == offset && j % spike_spacing == offset {
                        mesh.positions[j * resolution + i].z += spike_height * size;
                    }
                }
            }
            Ok(mesh)
        }
    }
}

fn check_resolution(value: usize, min: usize) -> Result<(), MeshError> {
    if value < min {
        return Err(MeshError::InvalidParam(format!(
            "resolution {value} is below the minimum {min}"
        )));
    }
    Ok(())
}

fn check_positive(name: &str, value: f64) -> Result<(), MeshError> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(MeshError::InvalidParam(format!("{name} must be positive, got {value}")));
    }
    Ok(())
}

fn random_amplitude(rng: &mut ChaCha8Rng, amplitude: f64) -> f64 {
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    sign * amplitude * rng.random_range(0.5..1.0)
}

/// Regular grid on `[0, size]^2`, counterclockwise seen from +z, with
/// `z = height(x, y)`.
fn plane(res: usize, size: f64, height: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    let step = size / (res - 1) as f64;
    let mut positions = Vec::with_capacity(res * res);
    for j in 0..res {
        for i in 0..res {
            let (x, y) = (i as f64 * step, j as f64 * step);
            positions.push(Vector3::new(x, y, height(x, y)));
        }
    }
    let mut triangles = Vec::with_capacity(2 * (res - 1) * (res - 1));
    for j in 0..res - 1 {
        for i in 0..res - 1 {
            let a = j * res + i;
            let (b, c, d) = (a + 1, a + res + 1, a + res);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh { positions, triangles }
}

fn cylinder(around: usize, along: usize, radius: f64, height: f64, offset: impl Fn(f64, f64) -> f64) -> TriangleMesh {
    let mut positions = Vec::with_capacity(around * along);
    for j in 0..along {
        let z = height * j as f64 / (along - 1) as f64;
        for i in 0..around {
            let theta = TAU * i as f64 / around as f64;
            let r = radius + offset(theta, z);
            positions.push(Vector3::new(r * theta.cos(), r * theta.sin(), z));
        }
    }
    let mut triangles = Vec::with_capacity(2 * around * (along - 1));
    for j in 0..along - 1 {
        for i in 0..around {
            let i1 = (i + 1) % around;
            let (a, b) = (j * around + i, j * around + i1);
            let (c, d) = (b + around, a + around);
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    TriangleMesh { positions, triangles }
}

/// Closed, outward-oriented surface of a lattice box with `cells` per axis
/// and physical `extent`, centered at the origin.
fn box_surface(cells: [usize; 3], extent: Vector3<f64>) -> TriangleMesh {
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut positions = Vec::new();
    let mut triangles = Vec::new();
    let mut vertex = |key: [usize; 3]| -> usize {
        *index.entry(key).or_insert_with(|| {
            let p = Vector3::from_fn(|a, _| extent[a] * (key[a] as f64 / cells[a] as f64 - 0.5));
            positions.push(p);
            positions.len() - 1
        })
    };
    // (fixed axis, at max side?, u axis, v axis) with u x v pointing outward.
    let sides = [
        (0, false, 2, 1),
        (0, true, 1, 2),
        (1, false, 0, 2),
        (1, true, 2, 0),
        (2, false, 1, 0),
        (2, true, 0, 1),
    ];
    for (fixed, max_side, u, v) in sides {
        let lattice = |a: usize, b: usize| {
            let mut key = [0usize; 3];
            key[fixed] = if max_side { cells[fixed] } else { 0 };
            key[u] = a;
            key[v] = b;
            key
        };
        for b in 0..cells[v] {
            for a in 0..cells[u] {
                let p00 = vertex(lattice(a, b));
                let p10 = vertex(lattice(a + 1, b));
                let p11 = vertex(lattice(a + 1, b + 1));
                let p01 = vertex(lattice(a, b + 1));
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            }
        }
    }
    TriangleMesh { positions, triangles }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::HalfEdgeMesh;

    #[test]
    fn grid_plane_two() {
        let m = make_test_mesh(&MeshGenerator::grid_plane(2)).unwrap();
        assert_eq!((m.num_vertices(), m.num_triangles()), (4, 2));
    }

    #[test]
    fn resolution_below_two_rejected() {
        assert!(matches!(
            make_test_mesh(&MeshGenerator::grid_plane(1)),
            Err(MeshError::InvalidParam(_))
        ));
        assert!(make_test_mesh(&MeshGenerator::spiky_plane(1)).is_err());
    }

    #[test]
    fn cylinder_boundary_only_at_ends() {
        let (around, along) = (16, 9);
        let he =
            HalfEdgeMesh::new(make_test_mesh(&MeshGenerator::bumpy_cylinder(around, along, 5, 1)).unwrap()).unwrap();
        let boundary = he.boundary_vertices();
        assert_eq!(boundary.len(), 2 * around);
        assert!(boundary.iter().all(|&v| v < around || v >= around * (along - 1)));
        // outward orientation: normals point away from the axis
        let p = he.positions();
        let [a, b, c] = he.triangles()[0].map(|i| p[i]);
        let n = (b - a).cross(&(c - a));
        assert!(n.x * a.x + n.y * a.y > 0.0);
    }

    #[test]
    fn bar_is_closed_and_outward() {
        let he = HalfEdgeMesh::new(make_test_mesh(&MeshGenerator::bar(3)).unwrap()).unwrap();
        assert!(he.halfedges().all(|h| !he.is_boundary(h)));
        let (v, f) = (he.num_vertices() as i64, he.num_faces() as i64);
        assert_eq!(v - f / 2, 2, "Euler characteristic of a sphere");
        // signed volume positive for outward orientation
        let p = he.positions();
        let volume: f64 = he
            .triangles()
            .iter()
            .map(|t| p[t[0]].dot(&p[t[1]].cross(&p[t[2]])) / 6.0)
            .sum();
        assert!((volume - 5.0).abs() < 1e-12, "volume {volume}");
    }

    #[test]
    fn seeded_meshes_are_deterministic() {
        for g in [
            MeshGenerator::bumpy_plane(12, 6, 42),
            MeshGenerator::bumpy_cylinder(10, 10, 6, 42),
        ] {
            assert_eq!(make_test_mesh(&g).unwrap(), make_test_mesh(&g).unwrap());
        }
        assert_ne!(
            make_test_mesh(&MeshGenerator::bumpy_plane(12, 6, 1)).unwrap(),
            make_test_mesh(&MeshGenerator::bumpy_plane(12, 6, 2)).unwrap()
        );
    }

    #[test]
    fn spikes_are_orthogonal_to_the_plane() {
        let m = make_test_mesh(&MeshGenerator::spiky_plane(13)).unwrap();
        let raised: Vec<_> = m.positions.iter().filter(|p| p.z > 0.0).collect();
        assert_eq!(raised.len(), 9);
        assert!(raised.iter().all(|p| (p.z - 0.06).abs() < 1e-15));
    }

    #[test]
    fn generator_json() {
        let g: MeshGenerator = serde_json::from_str(r#"{"kind":"bumpy_plane","resolution":5,"seed":3}"#).unwrap();
        assert_eq!(g.kind(), MeshKind::BumpyPlane);
        assert!(serde_json::from_str::<MeshGenerator>(r#"{"kind":"grid_plane","resolution":5,"bogus":1}"#).is_err());
    }
}

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{boundary_constraints, create_parent, io_error, mesh_error, HarnessError, Preset};
use crate::deform::{deform, DeformParams, Energies, TraceRow};
use crate::linear::ConstraintSet;
use crate::mesh::{make_test_mesh, read_path, save_mesh, HalfEdgeMesh, MeshGenerator, TriangleMesh};

/// A single batch deformation, read from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub mesh: MeshSource,
    #[serde(default)]
    pub params: DeformParams,
    /// Extra handles; with a preset source they replace preset handles on
    /// the same vertex.
    #[serde(default)]
    pub handles: Vec<HandleSpec>,
    /// Pin every boundary vertex at its rest position.
    #[serde(default)]
    pub fix_boundary: bool,
    pub output: OutputPaths,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    /// `.obj` or `.off` file.
    Path(PathBuf),
    Generator(MeshGenerator),
    /// Preset mesh together with its handles.
    Preset(Preset),
}

/// Target is `position` if given, else rest position plus `offset`, else
/// the rest position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HandleSpec {
    pub vertex: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    /// Deformed mesh, `.obj` or `.off`. Missing directories are created.
    pub mesh: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    pub vertices: usize,
    pub faces: usize,
    pub handles: usize,
    pub iterations: usize,
    pub converged: bool,
    pub energies: Energies,
    pub params: DeformParams,
    pub trace: Vec<TraceRow>,
}

impl JobConfig {
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let file = File::open(path).map_err(io_error(path))?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }

    /// Mesh plus handles, before any solve.
    pub fn problem(&self) -> Result<(HalfEdgeMesh, ConstraintSet), HarnessError> {
        let (mesh, mut constraints) = match &self.mesh {
            MeshSource::Path(path) => (
                HalfEdgeMesh::new(read_path(path).map_err(mesh_error(path))?)?,
                ConstraintSet::new(),
            ),
            MeshSource::Generator(g) => (HalfEdgeMesh::new(make_test_mesh(g)?)?, ConstraintSet::new()),
            MeshSource::Preset(p) => {
                let problem = p.build()?;
                (problem.mesh, problem.constraints)
            }
        };
        let rest = mesh.positions();
        for h in &self.handles {
            if h.vertex >= rest.len() {
                return Err(HarnessError::Config(format!(
                    "handle vertex {} is out of range for {} vertices",
                    h.vertex,
                    rest.len()
                )));
            }
            if h.position.is_some() && h.offset.is_some() {
                return Err(HarnessError::Config(format!(
                    "handle {} sets both position and offset",
                    h.vertex
                )));
            }
            let target = match (h.position, h.offset) {
                (Some(p), _) => Vector3::from(p),
                (None, Some(o)) => rest[h.vertex] + Vector3::from(o),
                (None, None) => rest[h.vertex],
            };
            if constraints.contains(h.vertex) {
                constraints.set_target(h.vertex, target)?;
            } else {
                constraints.insert(h.vertex, target)?;
            }
        }
        if self.fix_boundary {
            for (v, p) in boundary_constraints(&mesh).iter() {
                if !constraints.contains(v) {
                    constraints.insert(v, p)?;
                }
            }
        }
        Ok((mesh, constraints))
    }
}

/// Runs the job and writes its outputs.
pub fn run_job(config: &JobConfig) -> Result<JobReport, HarnessError> {
    config.params.validate()?;
    let (mesh, constraints) = config.problem()?;
    let result = deform(&mesh, &constraints, &config.params)?;
    if !result.converged {
        log::warn!("stopped after {} iterations without converging", result.iterations);
    }
    let deformed = TriangleMesh {
        positions: result.positions.clone(),
        triangles: mesh.triangles().to_vec(),
    };
    create_parent(&config.output.mesh)?;
    save_mesh(&config.output.mesh, &deformed).map_err(mesh_error(&config.output.mesh))?;
    let report = JobReport {
        vertices: mesh.num_vertices(),
        faces: mesh.num_faces(),
        handles: constraints.len(),
        iterations: result.iterations,
        converged: result.converged,
        energies: result.energies,
        params: config.params,
        trace: result.trace,
    };
    if let Some(path) = &config.output.report {
        create_parent(path)?;
        let file = File::create(path).map_err(io_error(path))?;
        serde_json::to_writer_pretty(file, &report)?;
    }
    Ok(report)
}

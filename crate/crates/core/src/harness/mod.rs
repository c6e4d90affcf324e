//! Batch jobs, benchmarks and energy traces over canned scenarios.

mod bench;
mod job;
mod scenario;
mod trace;

pub use bench::{run_bench, BenchCase, BenchConfig, BenchReport, BenchRow, Machine};
pub use job::{run_job, HandleSpec, JobConfig, JobReport, MeshSource, OutputPaths};
pub use scenario::{boundary_constraints, nearest_vertex, Preset, Problem};
pub use trace::{run_trace, write_trace_csv, TraceOutput, TraceSummary};

use thiserror::Error;

use crate::deform::DeformError;
use crate::mesh::MeshError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Deform(#[from] DeformError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<crate::linear::SolverError> for HarnessError {
    fn from(e: crate::linear::SolverError) -> Self {
        Self::Deform(e.into())
    }
}

/// Attaches `path` to bare I/O failures from the mesh readers and writers.
pub(crate) fn mesh_error(path: &std::path::Path) -> impl FnOnce(MeshError) -> HarnessError + '_ {
    move |e| match e {
        MeshError::Io(source) => io_error(path)(source),
        other => other.into(),
    }
}

/// Creates the directory that will hold `path`.
pub(crate) fn create_parent(path: &std::path::Path) -> Result<(), HarnessError> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir).map_err(io_error(dir)),
        _ => Ok(()),
    }
}

pub(crate) fn io_error(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

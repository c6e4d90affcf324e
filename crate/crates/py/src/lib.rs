//! Python bindings: meshes, the deformer, one-shot `deform`, and the
//! session state machine. Structured values cross the boundary as plain
//! Python dicts and lists.

use nalgebra::Vector3;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;
use smooth_arap::deform::{DeformResult, IterationReport};
use smooth_arap::harness::boundary_constraints;
use smooth_arap::linear::ConstraintSet;
use smooth_arap::mesh::{make_test_mesh, read_path, save_mesh};
use smooth_arap::session::{Session as CoreSession, SessionConfig};
use smooth_arap::{DeformParams, Deformer as CoreDeformer, HalfEdgeMesh, Initialization, MeshGenerator, TriangleMesh};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_error(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Serde value -> Python object through the `json` module.
fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(runtime_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Python keyword dict -> serde type through the `json` module.
fn from_kwargs<T: serde::de::DeserializeOwned>(py: Python<'_>, kwargs: Option<&Bound<'_, PyDict>>) -> PyResult<T> {
    let text: String = match kwargs {
        Some(d) => py.import("json")?.call_method1("dumps", (d,))?.extract()?,
        None => "{}".into(),
    };
    serde_json::from_str(&text).map_err(value_error)
}

fn points(positions: &[Vector3<f64>]) -> Vec<[f64; 3]> {
    positions.iter().map(|p| [p.x, p.y, p.z]).collect()
}

/// Triangle mesh with half-edge connectivity.
#[pyclass(module = "smooth_arap", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Mesh {
    inner: HalfEdgeMesh,
}

#[pymethods]
impl Mesh {
    #[new]
    fn new(positions: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> PyResult<Self> {
        let mesh =
            TriangleMesh::new(positions.into_iter().map(Vector3::from).collect(), triangles).map_err(value_error)?;
        Ok(Self {
            inner: HalfEdgeMesh::new(mesh).map_err(value_error)?,
        })
    }

    /// `Mesh.generate("bumpy_plane", resolution=40, seed=1)`.
    #[staticmethod]
    #[pyo3(signature = (kind, **params))]
    fn generate(py: Python<'_>, kind: &str, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let fields = PyDict::new(py);
        if let Some(p) = params {
            fields.update(p.as_mapping())?;
        }
        fields.set_item("kind", kind)?;
        let generator: MeshGenerator = from_kwargs(py, Some(&fields))?;
        let mesh = make_test_mesh(&generator).map_err(value_error)?;
        Ok(Self {
            inner: HalfEdgeMesh::new(mesh).map_err(value_error)?,
        })
    }

    /// Reads an `.obj` or `.off` file.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let mesh = read_path(&path).map_err(value_error)?;
        Ok(Self {
            inner: HalfEdgeMesh::new(mesh).map_err(value_error)?,
        })
    }

    /// Writes the mesh, optionally with replacement positions.
    #[pyo3(signature = (path, positions=None))]
    fn save(&self, path: std::path::PathBuf, positions: Option<Vec<[f64; 3]>>) -> PyResult<()> {
        let mut mesh = self.inner.mesh().clone();
        if let Some(p) = positions {
            if p.len() != mesh.positions.len() {
                return Err(value_error(format!(
                    "expected {} positions, got {}",
                    mesh.positions.len(),
                    p.len()
                )));
            }
            mesh.positions = p.into_iter().map(Vector3::from).collect();
        }
        save_mesh(&path, &mesh).map_err(runtime_error)
    }

    #[getter]
    fn num_vertices(&self) -> usize {
        self.inner.num_vertices()
    }

    #[getter]
    fn num_faces(&self) -> usize {
        self.inner.num_faces()
    }

    #[getter]
    fn positions(&self) -> Vec<[f64; 3]> {
        points(self.inner.positions())
    }

    #[getter]
    fn triangles(&self) -> Vec<[usize; 3]> {
        self.inner.triangles().to_vec()
    }

    fn boundary_vertices(&self) -> Vec<usize> {
        self.inner.boundary_vertices()
    }

    fn bbox_diagonal(&self) -> f64 {
        self.inner.mesh().bbox_diagonal()
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(vertices={}, faces={})",
            self.inner.num_vertices(),
            self.inner.num_faces()
        )
    }
}

fn result_dict<'py>(py: Python<'py>, r: &DeformResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("positions", points(&r.positions))?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("converged", r.converged)?;
    d.set_item("energies", to_py(py, &r.energies)?)?;
    d.set_item("trace", to_py(py, &r.trace)?)?;
    Ok(d)
}

fn report_dict<'py>(py: Python<'py>, r: &IterationReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("iteration", r.iteration)?;
    d.set_item("energies", to_py(py, &r.energies)?)?;
    d.set_item("change", r.change)?;
    d.set_item("converged", r.converged)?;
    Ok(d)
}

fn parse_init(name: &str) -> PyResult<Initialization> {
    serde_json::from_value(serde_json::Value::String(name.into())).map_err(value_error)
}

/// Local-global solver bound to one mesh. Parameters are the fields of the
/// deformation parameters, e.g. `Deformer(mesh, lambda=0.9, constraint_mode="kkt_updating")`.
#[pyclass(module = "smooth_arap")]
struct Deformer {
    inner: CoreDeformer,
}

#[pymethods]
impl Deformer {
    #[new]
    #[pyo3(signature = (mesh, **params))]
    fn new(py: Python<'_>, mesh: &Mesh, params: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let params: DeformParams = from_kwargs(py, params)?;
        Ok(Self {
            inner: CoreDeformer::new(mesh.inner.clone(), params).map_err(value_error)?,
        })
    }

    /// Current parameters as a dict.
    #[getter]
    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.params())
    }

    /// Updates the given fields; the rest keep their values.
    #[pyo3(signature = (**params))]
    fn set_params(&mut self, py: Python<'_>, params: Option<&Bound<'_, PyDict>>) -> PyResult<()> {
        let merged = PyDict::new(py);
        merged.update(to_py(py, self.inner.params())?.cast::<PyDict>()?.as_mapping())?;
        if let Some(p) = params {
            merged.update(p.as_mapping())?;
        }
        let params: DeformParams = from_kwargs(py, Some(&merged))?;
        self.inner.set_params(params).map_err(value_error)
    }

    /// Pins `vertex` at `position`, or where it currently is.
    #[pyo3(signature = (vertex, position=None))]
    fn add_handle(&mut self, vertex: usize, position: Option<[f64; 3]>) -> PyResult<()> {
        let target = match position {
            Some(p) => Vector3::from(p),
            None => *self
                .inner
                .positions()
                .get(vertex)
                .ok_or_else(|| value_error(format!("vertex {vertex} is out of range")))?,
        };
        self.inner.add_constraint(vertex, target).map_err(value_error)
    }

    fn move_handle(&mut self, vertex: usize, position: [f64; 3]) -> PyResult<()> {
        self.inner
            .move_constraint(vertex, Vector3::from(position))
            .map_err(value_error)
    }

    fn remove_handle(&mut self, vertex: usize) -> PyResult<()> {
        self.inner.remove_constraint(vertex).map_err(value_error)
    }

    /// Pins every boundary vertex at its rest position.
    fn fix_boundary(&mut self) -> PyResult<()> {
        let mut all = self.inner.constraints().clone();
        for (v, p) in boundary_constraints(self.inner.mesh()).iter() {
            if !all.contains(v) {
                all.insert(v, p).map_err(value_error)?;
            }
        }
        self.inner.set_constraints(all).map_err(value_error)
    }

    /// `{vertex: [x, y, z]}` of the current handles.
    #[getter]
    fn handles(&self) -> Vec<(usize, [f64; 3])> {
        self.inner
            .constraints()
            .iter()
            .map(|(v, t)| (v, [t.x, t.y, t.z]))
            .collect()
    }

    /// `original_mesh`, `poisson`, `bi_laplacian` or `previous`.
    fn initialize(&mut self, mode: &str) -> PyResult<()> {
        self.inner.initialize(parse_init(mode)?).map_err(runtime_error)
    }

    fn reset(&mut self) {
        self.inner.reset()
    }

    /// Runs until converged or `max_iterations` more iterations.
    fn run<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let result = self.inner.run().map_err(runtime_error)?;
        result_dict(py, &result)
    }

    /// Up to `count` iterations, stopping early on convergence.
    fn iterate<'py>(&mut self, py: Python<'py>, count: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let reports = self.inner.iterate_up_to(count).map_err(runtime_error)?;
        reports.iter().map(|r| report_dict(py, r)).collect()
    }

    fn energies<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.energies())
    }

    #[getter]
    fn positions(&self) -> Vec<[f64; 3]> {
        points(self.inner.positions())
    }

    #[setter]
    fn set_positions(&mut self, positions: Vec<[f64; 3]>) -> PyResult<()> {
        let p: Vec<_> = positions.into_iter().map(Vector3::from).collect();
        self.inner.set_positions(&p).map_err(value_error)
    }

    #[getter]
    fn iteration(&self) -> usize {
        self.inner.iteration()
    }

    /// Matrix factorizations performed so far.
    #[getter]
    fn factorizations(&self) -> usize {
        self.inner.factorizations()
    }
}

/// One-shot deformation. `handles` maps vertex index to target position.
#[pyfunction]
#[pyo3(signature = (mesh, handles, **params))]
fn deform<'py>(
    py: Python<'py>,
    mesh: &Mesh,
    handles: Vec<(usize, [f64; 3])>,
    params: Option<&Bound<'_, PyDict>>,
) -> PyResult<Bound<'py, PyDict>> {
    let params: DeformParams = from_kwargs(py, params)?;
    let constraints =
        ConstraintSet::from_pairs(handles.into_iter().map(|(v, p)| (v, Vector3::from(p)))).map_err(value_error)?;
    let result = smooth_arap::deform(&mesh.inner, &constraints, &params).map_err(runtime_error)?;
    result_dict(py, &result)
}

/// Interactive session: feed JSON requests, get JSON replies.
#[pyclass(module = "smooth_arap")]
struct Session {
    inner: CoreSession,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (**config))]
    fn new(py: Python<'_>, config: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let mut base = SessionConfig::default();
        if let Some(c) = config {
            let merged = PyDict::new(py);
            merged.update(to_py(py, &base)?.cast::<PyDict>()?.as_mapping())?;
            merged.update(c.as_mapping())?;
            base = from_kwargs(py, Some(&merged))?;
        }
        Ok(Self {
            inner: CoreSession::new(base),
        })
    }

    /// Handles one request and returns the serialized replies in order.
    fn handle(&mut self, request: &str) -> Vec<String> {
        self.inner
            .handle_text(request)
            .iter()
            .map(|r| serde_json::to_string(r).expect("server messages serialize"))
            .collect()
    }

    #[getter]
    fn is_shutdown(&self) -> bool {
        self.inner.is_shutdown()
    }
}

#[pymodule(name = "smooth_arap")]
fn smooth_arap_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    init_module(m)
}

/// Registers the module contents on `m`; also used to embed the module.
pub fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Mesh>()?;
    m.add_class::<Deformer>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(deform, m)?)?;
    m.add("PROTOCOL_VERSION", smooth_arap::session::PROTOCOL_VERSION)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

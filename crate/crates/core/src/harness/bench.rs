use std::fs::File;
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{io_error, HarnessError, Preset};
use crate::deform::{DeformParams, Deformer};
use crate::linear::{factorize, regularize, Factorization, SubstitutionSolver, UpdatingSolver};
use crate::mesh::MeshGenerator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub cases: Vec<BenchCase>,
    /// Timed repetitions per measurement; medians are reported.
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    /// Shared parameters; `lambda` is overridden per row.
    #[serde(default)]
    pub params: DeformParams,
}

impl BenchConfig {
    pub fn from_path(path: &Path) -> Result<Self, HarnessError> {
        let file = File::open(path).map_err(io_error(path))?;
        Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
    }
}

fn default_runs() -> usize {
    5
}

fn default_lambdas() -> Vec<f64> {
    vec![0.0, 0.95]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchCase {
    pub name: String,
    pub preset: Preset,
    /// Overrides the preset's mesh; handles follow the preset's rule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<MeshGenerator>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mesh: String,
    /// `original` for lambda = 0, otherwise `smooth`.
    pub method: String,
    pub lambda: f64,
    pub faces: usize,
    pub vertices: usize,
    pub handles: usize,
    pub factorization_ms: f64,
    pub solve_ms: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Adding one handle by refactorizing the free block.
    pub handle_add_standard_ms: f64,
    /// Adding one handle to the updating solver.
    pub handle_add_updating_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Machine {
    pub os: String,
    pub arch: String,
    pub threads: usize,
    pub cpu: Option<String>,
}

impl Machine {
    pub fn current() -> Self {
        let cpu = std::fs::read_to_string("/proc/cpuinfo").ok().and_then(|info| {
            info.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|s| s.trim().to_string())
        });
        Self {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            cpu,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub machine: Machine,
    pub runs: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_json(&self, path: &Path) -> Result<(), HarnessError> {
        let file = File::create(path).map_err(io_error(path))?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), HarnessError> {
        let mut writer = csv::Writer::from_path(path)?;
        for row in &self.rows {
            writer.serialize(row)?;
        }
        writer.flush().map_err(io_error(path))?;
        Ok(())
    }
}

fn median(mut samples: Vec<f64>) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

pub fn run_bench(config: &BenchConfig) -> Result<BenchReport, HarnessError> {
    if config.runs == 0 {
        return Err(HarnessError::Config("runs must be positive".into()));
    }
    let mut rows = Vec::new();
    for case in &config.cases {
        let problem = match &case.generator {
            Some(g) => case.preset.build_with(g)?,
            None => case.preset.build()?,
        };
        let n = problem.mesh.num_vertices();
        let extra = (0..n)
            .map(|k| (n / 2 + k) % n)
            .find(|v| !problem.constraints.contains(*v))
            .ok_or_else(|| HarnessError::Config(format!("{}: every vertex is already a handle", case.name)))?;

        for &lambda in &config.lambdas {
            let params = DeformParams {
                lambda,
                ..config.params
            };
            let mut factor_ms = Vec::new();
            let mut solve_ms = Vec::new();
            let mut standard_ms = Vec::new();
            let mut updating_ms = Vec::new();
            let mut outcome = None;
            for _ in 0..config.runs {
                let mut deformer = Deformer::new(problem.mesh.clone(), params)?;
                deformer.set_constraints(problem.constraints.clone())?;
                deformer.initialize(params.init)?;
                let start = Instant::now();
                deformer.prepare()?;
                factor_ms.push(millis(start));
                let start = Instant::now();
                let result = deformer.run()?;
                solve_ms.push(millis(start));
                outcome = Some((result.iterations, result.converged));

                let a = regularize(deformer.system_matrix(), params.epsilon);
                let mut grown = problem.constraints.clone();
                grown.insert(extra, Vector3::zeros())?;
                let start = Instant::now();
                SubstitutionSolver::new(&a, &grown)?;
                standard_ms.push(millis(start));

                let factor: Arc<dyn Factorization> = Arc::from(factorize(&a)?);
                let mut updating = UpdatingSolver::new(factor, params.epsilon, problem.constraints.clone())?;
                let start = Instant::now();
                updating.add_constraint(extra, Vector3::zeros())?;
                updating_ms.push(millis(start));
            }
            let (iterations, converged) = outcome.expect("runs > 0");
            rows.push(BenchRow {
                mesh: case.name.clone(),
                method: if lambda == 0.0 { "original" } else { "smooth" }.to_string(),
                lambda,
                faces: problem.mesh.num_faces(),
                vertices: n,
                handles: problem.constraints.len(),
                factorization_ms: median(factor_ms),
                solve_ms: median(solve_ms),
                iterations,
                converged,
                handle_add_standard_ms: median(standard_ms),
                handle_add_updating_ms: median(updating_ms),
            });
            log::info!("{} lambda={lambda}: {iterations} iterations", case.name);
        }
    }
    Ok(BenchReport {
        machine: Machine::current(),
        runs: config.runs,
        rows,
    })
}

use std::sync::Arc;

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use super::{
    assemble_rhs, assemble_system_matrix, evaluate_energies, initialize, local_step, ConstraintMode, DeformError,
    DeformParams, Energies, Initialization, RotationField,
};
use crate::geometry::{from_matrix, max_displacement, to_matrix};
use crate::linear::{
    factorize, regularize, ConstraintSet, Factorization, SparseSym, SubstitutionSolver, UpdatingSolver,
};
use crate::mesh::{DiscreteOperators, HalfEdgeMesh, TriangleMesh};

/// One local-global iteration: energies after the global step, evaluated
/// with the rotations that step used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub total: f64,
    pub arap: f64,
    pub smooth: f64,
    /// Largest vertex move over the rest bounding box diagonal.
    pub change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    pub energies: Energies,
    pub change: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformResult {
    pub positions: Vec<Vector3<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub energies: Energies,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug)]
enum Backend {
    /// Factor of the free block, dropped whenever the constrained set changes.
    Substitution(Option<SubstitutionSolver>),
    Kkt(UpdatingSolver),
}

/// Deformation state: rest mesh and operators, current positions and
/// rotations, constraints, and the cached linear solver.
#[derive(Debug)]
pub struct Deformer {
    mesh: HalfEdgeMesh,
    ops: DiscreteOperators,
    rest: Vec<Vector3<f64>>,
    rest_laplacians: Vec<Vector3<f64>>,
    bbox: f64,
    params: DeformParams,
    system: SparseSym,
    regularized: SparseSym,
    constraints: ConstraintSet,
    backend: Backend,
    positions: Vec<Vector3<f64>>,
    rotations: RotationField,
    iteration: usize,
    trace: Vec<TraceRow>,
    factorizations: usize,
    degenerate_rotations: usize,
}

impl Deformer {
    pub fn new(mesh: HalfEdgeMesh, params: DeformParams) -> Result<Self, DeformError> {
        params.validate()?;
        let ops = DiscreteOperators::assemble(&mesh)?;
        let rest = mesh.positions().to_vec();
        let rest_laplacians = ops.laplacian_vectors(&rest);
        let bbox = mesh.mesh().bbox_diagonal();
        let system = assemble_system_matrix(&ops, params.lambda);
        let regularized = regularize(&system, params.epsilon);
        let n = rest.len();
        let mut deformer = Self {
            mesh,
            ops,
            positions: rest.clone(),
            rest,
            rest_laplacians,
            bbox,
            params,
            system,
            regularized,
            constraints: ConstraintSet::new(),
            backend: Backend::Substitution(None),
            rotations: RotationField::identity(n),
            iteration: 0,
            trace: Vec::new(),
            factorizations: 0,
            degenerate_rotations: 0,
        };
        deformer.rebuild_backend()?;
        Ok(deformer)
    }

    pub fn from_mesh(mesh: TriangleMesh, params: DeformParams) -> Result<Self, DeformError> {
        Self::new(HalfEdgeMesh::new(mesh)?, params)
    }

    fn rebuild_backend(&mut self) -> Result<(), DeformError> {
        self.backend = match self.params.constraint_mode {
            ConstraintMode::Substitution => Backend::Substitution(None),
            ConstraintMode::KktUpdating => {
                let factor: Arc<dyn Factorization> = Arc::from(factorize(&self.regularized)?);
                self.factorizations += 1;
                Backend::Kkt(UpdatingSolver::new(
                    factor,
                    self.params.epsilon,
                    self.constraints.clone(),
                )?)
            }
        };
        Ok(())
    }

    pub fn mesh(&self) -> &HalfEdgeMesh {
        &self.mesh
    }

    pub fn operators(&self) -> &DiscreteOperators {
        &self.ops
    }

    pub fn rest(&self) -> &[Vector3<f64>] {
        &self.rest
    }

    pub fn rest_laplacians(&self) -> &[Vector3<f64>] {
        &self.rest_laplacians
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bbox
    }

    pub fn params(&self) -> &DeformParams {
        &self.params
    }

    pub fn system_matrix(&self) -> &SparseSym {
        &self.system
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }

    pub fn rotations(&self) -> &RotationField {
        &self.rotations
    }

    /// Iterations since construction or the last [`Deformer::reset`].
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    /// Sparse factorizations performed so far.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    /// Back-substitutions spent building `Q` (KKT mode only).
    pub fn back_substitutions(&self) -> usize {
        match &self.backend {
            Backend::Kkt(s) => s.back_substitutions(),
            Backend::Substitution(_) => 0,
        }
    }

    pub fn degenerate_rotations(&self) -> usize {
        self.degenerate_rotations
    }

    /// Applies new parameters. Changing `lambda`, `epsilon` or the constraint
    /// mode rebuilds the system matrix and its factorization.
    pub fn set_params(&mut self, params: DeformParams) -> Result<(), DeformError> {
        params.validate()?;
        let old = std::mem::replace(&mut self.params, params);
        if old.lambda != params.lambda || old.epsilon != params.epsilon {
            self.system = assemble_system_matrix(&self.ops, params.lambda);
            self.regularized = regularize(&self.system, params.epsilon);
            self.rebuild_backend()?;
        } else if old.constraint_mode != params.constraint_mode {
            self.rebuild_backend()?;
        }
        Ok(())
    }

    pub fn set_lambda(&mut self, lambda: f64) -> Result<(), DeformError> {
        self.set_params(DeformParams { lambda, ..self.params })
    }

    pub fn add_constraint(&mut self, vertex: usize, target: Vector3<f64>) -> Result<(), DeformError> {
        self.check_vertex(vertex)?;
        match &mut self.backend {
            Backend::Kkt(s) => s.add_constraint(vertex, target)?,
            Backend::Substitution(slot) => {
                if self.constraints.contains(vertex) {
                    return Err(crate::linear::SolverError::DuplicateConstraint(vertex).into());
                }
                *slot = None;
            }
        }
        self.constraints.insert(vertex, target)?;
        Ok(())
    }

    pub fn remove_constraint(&mut self, vertex: usize) -> Result<(), DeformError> {
        match &mut self.backend {
            Backend::Kkt(s) => s.remove_constraint(vertex)?,
            Backend::Substitution(slot) => {
                if !self.constraints.contains(vertex) {
                    return Err(crate::linear::SolverError::NotConstrained(vertex).into());
                }
                *slot = None;
            }
        }
        self.constraints.remove(vertex)?;
        Ok(())
    }

    pub fn move_constraint(&mut self, vertex: usize, target: Vector3<f64>) -> Result<(), DeformError> {
        self.constraints.set_target(vertex, target)?;
        if let Backend::Kkt(s) = &mut self.backend {
            s.set_target(vertex, target)?;
        }
        Ok(())
    }

    /// Replaces all constraints.
    pub fn set_constraints(&mut self, constraints: ConstraintSet) -> Result<(), DeformError> {
        constraints.check_range(self.rest.len())?;
        let same = self.constraints.indices() == constraints.indices();
        self.constraints = constraints;
        match &mut self.backend {
            Backend::Substitution(slot) => {
                if !same {
                    *slot = None;
                }
            }
            Backend::Kkt(s) => {
                if same {
                    for (v, t) in self.constraints.iter() {
                        s.set_target(v, t)?;
                    }
                } else {
                    *s = UpdatingSolver::new(s.factor().clone(), self.params.epsilon, self.constraints.clone())?;
                }
            }
        }
        Ok(())
    }

    fn check_vertex(&self, vertex: usize) -> Result<(), DeformError> {
        let count = self.rest.len();
        if vertex >= count {
            return Err(crate::linear::SolverError::VertexOutOfRange { vertex, count }.into());
        }
        Ok(())
    }

    pub fn set_positions(&mut self, positions: &[Vector3<f64>]) -> Result<(), DeformError> {
        if positions.len() != self.rest.len() {
            return Err(crate::linear::SolverError::DimensionMismatch {
                expected: self.rest.len(),
                found: positions.len(),
            }
            .into());
        }
        self.positions = positions.to_vec();
        Ok(())
    }

    /// Replaces the current positions by the chosen initial guess.
    /// `Previous` keeps the current positions with handles snapped.
    pub fn initialize(&mut self, mode: Initialization) -> Result<(), DeformError> {
        self.positions = initialize(&self.ops, &self.rest, &self.constraints, mode, Some(&self.positions))?;
        Ok(())
    }

    /// Back to the rest pose with identity rotations and an empty trace.
    /// Constraints are kept.
    pub fn reset(&mut self) {
        self.positions = self.rest.clone();
        self.rotations = RotationField::identity(self.rest.len());
        self.iteration = 0;
        self.trace.clear();
    }

    /// Energies of the current positions under the current rotations.
    pub fn energies(&self) -> Energies {
        evaluate_energies(
            &self.mesh,
            &self.ops,
            &self.rest,
            &self.rest_laplacians,
            &self.positions,
            &self.rotations,
            self.params.lambda,
        )
    }

    pub fn local_step(&mut self) -> &RotationField {
        let (rotations, degenerate) = local_step(
            &self.mesh,
            &self.ops,
            &self.rest,
            &self.rest_laplacians,
            &self.positions,
            self.params.rotation_fit,
            self.params.lambda,
        );
        self.rotations = rotations;
        self.degenerate_rotations += degenerate;
        &self.rotations
    }

    /// Right-hand side `r` of the global step for the current rotations.
    pub fn rhs(&self) -> DMatrix<f64> {
        assemble_rhs(
            &self.mesh,
            &self.ops,
            &self.rest,
            &self.rest_laplacians,
            &self.rotations,
            self.params.lambda,
        )
    }

    /// Builds any factorization the next global step would need.
    pub fn prepare(&mut self) -> Result<(), DeformError> {
        if let Backend::Substitution(slot @ None) = &mut self.backend {
            *slot = Some(SubstitutionSolver::new(&self.regularized, &self.constraints)?);
            self.factorizations += 1;
        }
        Ok(())
    }

    /// Solves for new positions with the current rotations and returns the
    /// relative change.
    pub fn global_step(&mut self) -> Result<f64, DeformError> {
        self.prepare()?;
        let rhs = self.rhs();
        let prev = to_matrix(&self.positions);
        let next = match &mut self.backend {
            Backend::Substitution(slot) => {
                let solver = slot.as_ref().expect("prepared above");
                solver.solve(&(rhs + &prev * self.params.epsilon), &self.constraints)?
            }
            Backend::Kkt(s) => s.kkt_solve(&rhs, &prev)?,
        };
        if next.iter().any(|x| !x.is_finite()) {
            return Err(DeformError::NonFinite {
                iteration: self.iteration + 1,
            });
        }
        let next = from_matrix(&next);
        let change = max_displacement(&next, &self.positions) / self.bbox;
        self.positions = next;
        Ok(change)
    }

    pub fn iterate(&mut self) -> Result<IterationReport, DeformError> {
        self.local_step();
        let change = self.global_step()?;
        self.iteration += 1;
        let energies = self.energies();
        if !energies.is_finite() {
            return Err(DeformError::NonFinite {
                iteration: self.iteration,
            });
        }
        self.trace.push(TraceRow {
            iteration: self.iteration,
            total: energies.total,
            arap: energies.arap,
            smooth: energies.smooth,
            change,
        });
        Ok(IterationReport {
            iteration: self.iteration,
            energies,
            change,
            converged: change < self.params.tolerance,
        })
    }

    /// Iterates until converged or `max_iterations` more iterations ran.
    /// Returns the reports of this call.
    pub fn iterate_up_to(&mut self, max_iterations: usize) -> Result<Vec<IterationReport>, DeformError> {
        let mut reports = Vec::new();
        for _ in 0..max_iterations {
            let report = self.iterate()?;
            reports.push(report);
            if report.converged {
                break;
            }
        }
        Ok(reports)
    }

    /// Runs the loop from the current positions under `params.max_iterations`.
    pub fn run(&mut self) -> Result<DeformResult, DeformError> {
        let start = self.trace.len();
        let reports = self.iterate_up_to(self.params.max_iterations)?;
        let converged = reports.last().is_some_and(|r| r.converged);
        Ok(DeformResult {
            positions: self.positions.clone(),
            iterations: reports.len(),
            converged,
            energies: reports.last().map(|r| r.energies).unwrap_or_else(|| self.energies()),
            trace: self.trace[start..].to_vec(),
        })
    }
}

/// Deforms `mesh` under `constraints`, starting from `params.init`.
/// `Previous` starts from the rest pose.
pub fn deform(
    mesh: &HalfEdgeMesh,
    constraints: &ConstraintSet,
    params: &DeformParams,
) -> Result<DeformResult, DeformError> {
    let mut deformer = Deformer::new(mesh.clone(), *params)?;
    deformer.set_constraints(constraints.clone())?;
    deformer.initialize(params.init)?;
    deformer.run()
}

/// Deforms `mesh` starting from `initial` with handles snapped to targets.
pub fn deform_from(
    mesh: &HalfEdgeMesh,
    constraints: &ConstraintSet,
    params: &DeformParams,
    initial: &[Vector3<f64>],
) -> Result<DeformResult, DeformError> {
    let mut deformer = Deformer::new(mesh.clone(), *params)?;
    deformer.set_constraints(constraints.clone())?;
    deformer.set_positions(initial)?;
    deformer.initialize(Initialization::Previous)?;
    deformer.run()
}

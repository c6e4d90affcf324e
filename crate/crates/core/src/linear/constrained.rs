//! Point constraints `H X = C`: substitution and the regularized KKT
//! scheme with incremental constraint updates.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Dyn, FullPivLU, Vector3};

use super::{factorize, Factorization, SolverError, SparseSym};

/// Constrained vertices (rows of `H`) in insertion order, with targets (rows
/// of `C`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintSet {
    indices: Vec<usize>,
    targets: Vec<Vector3<f64>>,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, Vector3<f64>)>) -> Result<Self, SolverError> {
        let mut set = Self::new();
        for (v, t) in pairs {
            set.insert(v, t)?;
        }
        Ok(set)
    }

    pub fn insert(&mut self, vertex: usize, target: Vector3<f64>) -> Result<(), SolverError> {
        if self.contains(vertex) {
            return Err(SolverError::DuplicateConstraint(vertex));
        }
        self.indices.push(vertex);
        self.targets.push(target);
        Ok(())
    }

    /// Removes `vertex` and returns the slot it occupied.
    pub fn remove(&mut self, vertex: usize) -> Result<usize, SolverError> {
        let slot = self.slot(vertex).ok_or(SolverError::NotConstrained(vertex))?;
        self.indices.remove(slot);
        self.targets.remove(slot);
        Ok(slot)
    }

    pub fn set_target(&mut self, vertex: usize, target: Vector3<f64>) -> Result<(), SolverError> {
        let slot = self.slot(vertex).ok_or(SolverError::NotConstrained(vertex))?;
        self.targets[slot] = target;
        Ok(())
    }

    pub fn slot(&self, vertex: usize) -> Option<usize> {
        self.indices.iter().position(|&v| v == vertex)
    }

    pub fn contains(&self, vertex: usize) -> bool {
        self.indices.contains(&vertex)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn targets(&self) -> &[Vector3<f64>] {
        &self.targets
    }

    pub fn target(&self, vertex: usize) -> Option<Vector3<f64>> {
        self.slot(vertex).map(|s| self.targets[s])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Vector3<f64>)> + '_ {
        self.indices.iter().copied().zip(self.targets.iter().copied())
    }

    pub fn check_range(&self, count: usize) -> Result<(), SolverError> {
        match self.indices.iter().find(|&&v| v >= count) {
            Some(&vertex) => Err(SolverError::VertexOutOfRange { vertex, count }),
            None => Ok(()),
        }
    }

    /// Same constrained vertices, ignoring order and targets.
    pub fn same_vertices(&self, other: &ConstraintSet) -> bool {
        let mut a = self.indices.clone();
        let mut b = other.indices.clone();
        a.sort_unstable();
        b.sort_unstable();
        a == b
    }
}

/// `A + eps I`.
pub fn regularize(a: &SparseSym, epsilon: f64) -> SparseSym {
    a.shifted(epsilon)
}

/// One-shot constrained solve by substitution.
pub fn substitution_solve(
    a: &SparseSym,
    rhs: &DMatrix<f64>,
    constraints: &ConstraintSet,
) -> Result<DMatrix<f64>, SolverError> {
    SubstitutionSolver::new(a, constraints)?.solve(rhs, constraints)
}

/// Factorization of the free block `A_ff`, reusable while the constrained
/// vertex set stays the same (targets may change).
#[derive(Debug)]
pub struct SubstitutionSolver {
    a: SparseSym,
    constrained: ConstraintSet,
    free: Vec<usize>,
    factor: Option<Box<dyn Factorization>>,
}

impl SubstitutionSolver {
    pub fn new(a: &SparseSym, constraints: &ConstraintSet) -> Result<Self, SolverError> {
        let n = a.dim();
        constraints.check_range(n)?;
        let mut is_constrained = vec![false; n];
        for &v in constraints.indices() {
            is_constrained[v] = true;
        }
        let free: Vec<usize> = (0..n).filter(|&v| !is_constrained[v]).collect();
        let factor = if free.is_empty() {
            None
        } else {
            let block = a.principal_submatrix(&free);
            Some(factorize(&block).map_err(|e| match e {
                SolverError::NotPositiveDefinite { .. } => SolverError::SingularSystem,
                other => other,
            })?)
        };
        Ok(Self {
            a: a.clone(),
            constrained: constraints.clone(),
            free,
            factor,
        })
    }

    pub fn handles(&self, constraints: &ConstraintSet) -> bool {
        self.constrained.same_vertices(constraints)
    }

    /// Solves with the targets in `constraints`, which must constrain the
    /// same vertices the solver was built for.
    pub fn solve(&self, rhs: &DMatrix<f64>, constraints: &ConstraintSet) -> Result<DMatrix<f64>, SolverError> {
        let n = self.a.dim();
        if rhs.nrows() != n {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                found: rhs.nrows(),
            });
        }
        if !self.handles(constraints) {
            return Err(SolverError::SingularSystem);
        }
        let k = rhs.ncols();
        let mut known = DMatrix::zeros(n, k);
        for (v, t) in constraints.iter() {
            for c in 0..k {
                known[(v, c)] = t[c];
            }
        }
        let mut out = known.clone();
        if let Some(factor) = &self.factor {
            let coupling = self.a.mul_dense(&known);
            let mut reduced = DMatrix::from_fn(self.free.len(), k, |i, c| {
                let v = self.free[i];
                rhs[(v, c)] - coupling[(v, c)]
            });
            factor.solve_in_place(&mut reduced);
            for (i, &v) in self.free.iter().enumerate() {
                for c in 0..k {
                    out[(v, c)] = reduced[(i, c)];
                }
            }
        }
        Ok(out)
    }
}

/// Constrained solver over a fixed factorization of `A~ = A + eps I` that
/// keeps `Q = A~^-1 H^T` in sync with its constraint set.
#[derive(Debug, Clone)]
pub struct UpdatingSolver {
    factor: Arc<dyn Factorization>,
    epsilon: f64,
    q: Vec<DVector<f64>>,
    constraints: ConstraintSet,
    back_substitutions: usize,
}

impl UpdatingSolver {
    /// Builds `Q` with one back-substitution per constrained vertex.
    pub fn new(factor: Arc<dyn Factorization>, epsilon: f64, constraints: ConstraintSet) -> Result<Self, SolverError> {
        let n = factor.dim();
        constraints.check_range(n)?;
        let mut rhs = DMatrix::zeros(n, constraints.len());
        for (j, &v) in constraints.indices().iter().enumerate() {
            rhs[(v, j)] = 1.0;
        }
        factor.solve_in_place(&mut rhs);
        let q = rhs.column_iter().map(|c| c.into_owned()).collect();
        Ok(Self {
            factor,
            epsilon,
            q,
            back_substitutions: constraints.len(),
            constraints,
        })
    }

    pub fn factor(&self) -> &Arc<dyn Factorization> {
        &self.factor
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.factor.dim()
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn back_substitutions(&self) -> usize {
        self.back_substitutions
    }

    pub fn q_column(&self, slot: usize) -> &DVector<f64> {
        &self.q[slot]
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        if self.q.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&self.q)
        }
    }

    /// Appends a column to `Q` with a single back-substitution.
    pub fn add_constraint(&mut self, vertex: usize, target: Vector3<f64>) -> Result<(), SolverError> {
        let n = self.dim();
        if vertex >= n {
            return Err(SolverError::VertexOutOfRange { vertex, count: n });
        }
        self.constraints.insert(vertex, target)?;
        let mut e = DMatrix::zeros(n, 1);
        e[(vertex, 0)] = 1.0;
        self.factor.solve_in_place(&mut e);
        self.q.push(e.column(0).into_owned());
        self.back_substitutions += 1;
        Ok(())
    }

    /// Drops the matching column of `Q`; no solve.
    pub fn remove_constraint(&mut self, vertex: usize) -> Result<(), SolverError> {
        let slot = self.constraints.remove(vertex)?;
        self.q.remove(slot);
        Ok(())
    }

    pub fn set_target(&mut self, vertex: usize, target: Vector3<f64>) -> Result<(), SolverError> {
        self.constraints.set_target(vertex, target)
    }

    /// `r~ = r + eps * prev`.
    pub fn regularized_rhs(&self, r: &DMatrix<f64>, prev: &DMatrix<f64>) -> DMatrix<f64> {
        r + prev * self.epsilon
    }

    fn dense_block(&self) -> Result<FullPivLU<f64, Dyn, Dyn>, SolverError> {
        let nd = self.constraints.len();
        let rows = self.constraints.indices();
        // (Q^T H^T)_{ij} = Q[h_j, i]
        let block = DMatrix::from_fn(nd, nd, |i, j| -self.q[i][rows[j]]);
        let lu = block.full_piv_lu();
        if !lu.is_invertible() {
            return Err(SolverError::SingularConstraintBlock);
        }
        Ok(lu)
    }

    fn solve_block(lu: &FullPivLU<f64, Dyn, Dyn>, mut rhs: DMatrix<f64>) -> Result<DMatrix<f64>, SolverError> {
        if !lu.solve_mut(&mut rhs) || rhs.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::SingularConstraintBlock);
        }
        Ok(rhs)
    }

    /// Lagrange multipliers from the dense `n_d x n_d` system
    /// `-Q^T H^T L = C - Q^T r~`.
    pub fn multipliers(&self, r_tilde: &DMatrix<f64>) -> Result<DMatrix<f64>, SolverError> {
        let lu = self.dense_block()?;
        Self::solve_block(&lu, self.multiplier_rhs(r_tilde))
    }

    fn multiplier_rhs(&self, r_tilde: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(self.constraints.len(), r_tilde.ncols(), |i, c| {
            self.constraints.targets()[i][c] - self.q[i].dot(&r_tilde.column(c))
        })
    }

    /// Solves the regularized KKT system for the `n x k` right-hand side `r`
    /// and previous iterate `prev`.
    ///
    /// `A~^-1` is as ill-conditioned as `1 / eps`, which shows up as
    /// constraint residuals around `1e-8`. One correction `V' -= Q dL` with
    /// `-Q^T H^T dL = C - H V'` removes them without another sparse solve.
    pub fn kkt_solve(&self, r: &DMatrix<f64>, prev: &DMatrix<f64>) -> Result<DMatrix<f64>, SolverError> {
        let n = self.dim();
        if r.nrows() != n || prev.shape() != r.shape() {
            return Err(SolverError::DimensionMismatch {
                expected: n,
                found: r.nrows(),
            });
        }
        let mut x = self.regularized_rhs(r, prev);
        if self.constraints.is_empty() {
            self.factor.solve_in_place(&mut x);
            return Ok(x);
        }
        let lu = self.dense_block()?;
        let multipliers = Self::solve_block(&lu, self.multiplier_rhs(&x))?;
        let k = x.ncols();
        for (i, &v) in self.constraints.indices().iter().enumerate() {
            for c in 0..k {
                x[(v, c)] -= multipliers[(i, c)];
            }
        }
        self.factor.solve_in_place(&mut x);

        let residual = DMatrix::from_fn(self.constraints.len(), k, |i, c| {
            self.constraints.targets()[i][c] - x[(self.constraints.indices()[i], c)]
        });
        let correction = Self::solve_block(&lu, residual)?;
        for (i, q) in self.q.iter().enumerate() {
            for c in 0..k {
                x.column_mut(c).axpy(-correction[(i, c)], q, 1.0);
            }
        }
        Ok(x)
    }
}

//! Factorizations of symmetric positive definite matrices.

use std::fmt;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};
use nalgebra::{DMatrix, Dyn};

use super::{SolverError, SparseSym};

/// A reusable solver for `A x = b` with `A` symmetric positive definite.
pub trait Factorization: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    /// Overwrites the `n x k` right-hand side with the solution.
    fn solve_in_place(&self, rhs: &mut DMatrix<f64>);

    fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = rhs.clone();
        self.solve_in_place(&mut x);
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Supernodal/simplicial sparse Cholesky with a fill-reducing ordering.
    #[default]
    SparseCholesky,
    /// Dense Cholesky; only sensible for small systems.
    DenseCholesky,
}

pub fn factorize(a: &SparseSym) -> Result<Box<dyn Factorization>, SolverError> {
    factorize_with(a, Backend::default())
}

pub fn factorize_with(a: &SparseSym, backend: Backend) -> Result<Box<dyn Factorization>, SolverError> {
    Ok(match backend {
        Backend::SparseCholesky => Box::new(SparseCholesky::new(a)?),
        Backend::DenseCholesky => Box::new(DenseCholesky::new(a)?),
    })
}

pub struct SparseCholesky {
    n: usize,
    llt: Llt<usize, f64>,
}

impl fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SparseCholesky")
            .field("n", &self.n)
            .finish_non_exhaustive()
    }
}

impl SparseCholesky {
    pub fn new(a: &SparseSym) -> Result<Self, SolverError> {
        let n = a.dim();
        // Row i of the upper triangle is column i of the lower triangle.
        let triplets: Vec<Triplet<usize, usize, f64>> =
            a.upper_triplets().map(|(i, j, v)| Triplet::new(j, i, v)).collect();
        let lower = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets)
            .map_err(|e| SolverError::Backend(format!("{e:?}")))?;
        let llt = lower.sp_cholesky(Side::Lower).map_err(|e| match e {
            faer::sparse::linalg::LltError::Numeric(
                faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index },
            ) => SolverError::NotPositiveDefinite { pivot: index },
            other => SolverError::Backend(format!("{other:?}")),
        })?;
        Ok(Self { n, llt })
    }
}

impl Factorization for SparseCholesky {
    fn dim(&self) -> usize {
        self.n
    }

    fn solve_in_place(&self, rhs: &mut DMatrix<f64>) {
        assert_eq!(rhs.nrows(), self.n, "right-hand side has the wrong number of rows");
        let (rows, cols) = rhs.shape();
        let view = MatMut::from_column_major_slice_mut(rhs.as_mut_slice(), rows, cols);
        self.llt.solve_in_place(view);
    }
}

#[derive(Debug)]
pub struct DenseCholesky {
    chol: nalgebra::Cholesky<f64, Dyn>,
}

impl DenseCholesky {
    pub fn new(a: &SparseSym) -> Result<Self, SolverError> {
        let chol = a
            .to_dense()
            .cholesky()
            .ok_or(SolverError::NotPositiveDefinite { pivot: 0 })?;
        Ok(Self { chol })
    }
}

impl Factorization for DenseCholesky {
    fn dim(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    fn solve_in_place(&self, rhs: &mut DMatrix<f64>) {
        self.chol.solve_mut(rhs);
    }
}

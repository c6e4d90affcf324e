//! Compressed-row storage for symmetric sparse matrices.
//!
//! Both triangles are stored so row access is also column access. Assembly
//! routines add `(i, j)` and `(j, i)` contributions with identical values, so
//! symmetry holds exactly rather than to rounding.

use nalgebra::{DMatrix, DVector};

use super::SolverError;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Sums duplicate entries and checks that the result is exactly symmetric
    /// with finite entries.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, SolverError> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SolverError::DimensionMismatch {
                    expected: n,
                    found: i.max(j) + 1,
                });
            }
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_by_key(|&(j, _)| j);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut sum = 0.0;
                while k < row.len() && row[k].0 == j {
                    sum += row[k].1;
                    k += 1;
                }
                cols.push(j);
                vals.push(sum);
            }
            row_ptr.push(cols.len());
        }
        let m = Self { n, row_ptr, cols, vals };
        m.check()?;
        Ok(m)
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            cols: (0..d.len()).collect(),
            vals: d.to_vec(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            row_ptr: vec![0; n + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    fn check(&self) -> Result<(), SolverError> {
        if let Some(k) = self.vals.iter().position(|v| !v.is_finite()) {
            let i = self.row_ptr.partition_point(|&p| p <= k) - 1;
            return Err(SolverError::NonFinite { row: i });
        }
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                if self.get(j, i) != v {
                    return Err(SolverError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[range.clone()]
            .iter()
            .copied()
            .zip(self.vals[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[range.clone()].binary_search(&j) {
            Ok(k) => self.vals[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Entries `(i, j, value)` with `j >= i`.
    pub fn upper_triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).filter(move |&(j, _)| j >= i).map(move |(j, v)| (i, j, v)))
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `self * x` for a column-major `n x k` matrix.
    pub fn mul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n);
        let mut out = DMatrix::zeros(self.n, x.ncols());
        for c in 0..x.ncols() {
            let col = x.column(c);
            for i in 0..self.n {
                out[(i, c)] = self.row(i).map(|(j, v)| v * col[j]).sum();
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// `alpha * self + beta * other` over the union of both patterns.
    pub fn linear_combination(&self, alpha: f64, other: &SparseSym, beta: f64) -> SparseSym {
        assert_eq!(self.n, other.n);
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut cols = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut vals = Vec::with_capacity(cols.capacity());
        row_ptr.push(0);
        for i in 0..self.n {
            let mut a = self.row(i).peekable();
            let mut b = other.row(i).peekable();
            loop {
                let (j, v) = match (a.peek().copied(), b.peek().copied()) {
                    (None, None) => break,
                    (Some((ja, va)), Some((jb, _))) if ja < jb => {
                        a.next();
                        (ja, alpha * va)
                    }
                    (Some((ja, _)), Some((jb, vb))) if jb < ja => {
                        b.next();
                        (jb, beta * vb)
                    }
                    (Some((ja, va)), Some((_, vb))) => {
                        a.next();
                        b.next();
                        (ja, alpha * va + beta * vb)
                    }
                    (Some((ja, va)), None) => {
                        a.next();
                        (ja, alpha * va)
                    }
                    (None, Some((jb, vb))) => {
                        b.next();
                        (jb, beta * vb)
                    }
                };
                cols.push(j);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        SparseSym {
            n: self.n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// `self + shift * I`.
    pub fn shifted(&self, shift: f64) -> SparseSym {
        self.linear_combination(1.0, &SparseSym::identity(self.n), shift)
    }

    /// `self^T diag(weights) self`, computed row by row with a dense
    /// accumulator. Symmetric by construction since `self` is.
    pub fn weighted_gram(&self, weights: &[f64]) -> SparseSym {
        assert_eq!(weights.len(), self.n);
        let n = self.n;
        let mut acc = vec![0.0; n];
        let mut marker = vec![usize::MAX; n];
        let mut touched = Vec::new();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            touched.clear();
            // (A^T D A)_{ij} = sum_k A_ki d_k A_kj, and A_ki = A_ik.
            for (k, a_ik) in self.row(i) {
                let s = a_ik * weights[k];
                for (j, a_kj) in self.row(k) {
                    if marker[j] != i {
                        marker[j] = i;
                        acc[j] = 0.0;
                        touched.push(j);
                    }
                    acc[j] += s * a_kj;
                }
            }
            touched.sort_unstable();
            for &j in &touched {
                cols.push(j);
                vals.push(acc[j]);
            }
            row_ptr.push(cols.len());
        }
        let mut out = SparseSym { n, row_ptr, cols, vals };
        out.symmetrize();
        out
    }

    /// Averages mirrored entries so the stored matrix is exactly symmetric.
    /// Row-wise products accumulate in different orders for `(i, j)` and
    /// `(j, i)`, which can differ in the last bit.
    fn symmetrize(&mut self) {
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                if j > i {
                    let mirrored = self.get(j, i);
                    let avg = 0.5 * (self.vals[k] + mirrored);
                    self.vals[k] = avg;
                    let range = self.row_ptr[j]..self.row_ptr[j + 1];
                    let pos = range.start + self.cols[range].binary_search(&i).expect("pattern is symmetric");
                    self.vals[pos] = avg;
                }
            }
        }
    }

    /// Principal submatrix on `keep` (sorted, unique), reindexed `0..keep.len()`.
    pub fn principal_submatrix(&self, keep: &[usize]) -> SparseSym {
        let mut new_index = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            new_index[i] = k;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for &i in keep {
            for (j, v) in self.row(i) {
                if new_index[j] != usize::MAX {
                    cols.push(new_index[j]);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseSym {
            n: keep.len(),
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&DVector::from_vec(self.mul_vec(x.as_slice())))
    }
}

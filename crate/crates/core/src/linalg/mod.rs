//! Sparse storage and the iterative solvers used by the time steppers.

mod constrained;
mod krylov;

pub use constrained::{
    saddle_system, solve_constrained, solve_constrained_multiplier, tangent_basis, ConstrainedSolution,
    MultiplierSolution, CONSTRAINT_UNIT_TOL,
};
pub use krylov::{solve_bicgstab, solve_gmres, solve_spd, SolveStats};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no convergence after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("iteration broke down after {iterations} iterations")]
    Breakdown { iterations: usize },
    #[error("NaN encountered after {iterations} iterations")]
    NotANumber { iterations: usize },
    #[error("constraint vector at node {node} has norm {norm}, expected 1")]
    ConstraintNotUnit { node: usize, norm: f64 },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

/// Tolerance and iteration cap for the Krylov solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once `‖Ax - b‖ ≤ tol_rel · ‖b‖`.
    pub tol_rel: f64,
    /// Iteration cap; `None` means ten times the system size.
    pub max_iter: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol_rel: 1e-10, max_iter: None }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tol_rel > 0.0) {
            return Err(SolverError::InvalidConfig(format!("tol_rel must be positive, got {}", self.tol_rel)));
        }
        if self.max_iter == Some(0) {
            return Err(SolverError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn iteration_cap(&self, n: usize) -> usize {
        self.max_iter.unwrap_or(10 * n.max(1))
    }
}

/// Compressed-row sparse matrix with strictly increasing column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix { n_rows, n_cols, row_ptr: vec![0; n_rows + 1], col_idx: vec![], values: vec![] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    /// Builds a matrix from raw CSR arrays, checking the storage invariants.
    pub fn try_from_parts(
        n_rows: usize,
        n_cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self, SolverError> {
        let bad = |m: &str| Err(SolverError::DimensionMismatch(m.to_string()));
        if row_ptr.len() != n_rows + 1 || row_ptr[0] != 0 || row_ptr[n_rows] != col_idx.len() {
            return bad("row offsets do not match column array");
        }
        if col_idx.len() != values.len() {
            return bad("column and value arrays differ in length");
        }
        for i in 0..n_rows {
            if row_ptr[i] > row_ptr[i + 1] {
                return bad("row offsets are not monotone");
            }
            let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) || cols.iter().any(|&c| c >= n_cols) {
                return bad("column indices must be strictly increasing and in range");
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        Ok(CsrMatrix { n_rows, n_cols, row_ptr, col_idx, values })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`.
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>, SolverError> {
        if x.len() != self.n_cols {
            return Err(SolverError::DimensionMismatch(format!(
                "matrix has {} columns, vector has {} entries",
                self.n_cols,
                x.len()
            )));
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    pub(crate) fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    /// `xᵀ A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        dot(x, &y)
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut coo = CooMatrix::new(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                coo.push(j, i, v);
            }
        }
        coo.to_csr()
    }

    pub fn scaled(&self, s: f64) -> CsrMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `a·self + b·other`, merging sparsity patterns.
    pub fn linear_combination(&self, a: f64, other: &CsrMatrix, b: f64) -> Result<CsrMatrix, SolverError> {
        if self.n_rows != other.n_rows || self.n_cols != other.n_cols {
            return Err(SolverError::DimensionMismatch(format!(
                "cannot add {}x{} and {}x{}",
                self.n_rows, self.n_cols, other.n_rows, other.n_cols
            )));
        }
        let mut row_ptr = Vec::with_capacity(self.n_rows + 1);
        let mut col_idx = Vec::with_capacity(self.nnz().max(other.nnz()));
        let mut values = Vec::with_capacity(self.nnz().max(other.nnz()));
        row_ptr.push(0);
        for i in 0..self.n_rows {
            let (mut p, pe) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let (mut q, qe) = (other.row_ptr[i], other.row_ptr[i + 1]);
            while p < pe || q < qe {
                let cp = if p < pe { self.col_idx[p] } else { usize::MAX };
                let cq = if q < qe { other.col_idx[q] } else { usize::MAX };
                if cp < cq {
                    col_idx.push(cp);
                    values.push(a * self.values[p]);
                    p += 1;
                } else if cq < cp {
                    col_idx.push(cq);
                    values.push(b * other.values[q]);
                    q += 1;
                } else {
                    col_idx.push(cp);
                    values.push(a * self.values[p] + b * other.values[q]);
                    p += 1;
                    q += 1;
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values })
    }

    /// Submatrix on the given (sorted) row and column index sets.
    pub fn restrict(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &r in rows {
            for (c, v) in self.row(r) {
                let mapped = col_map[c];
                if mapped != usize::MAX {
                    col_idx.push(mapped);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        // the column map is monotone, so sorted order is preserved
        CsrMatrix { n_rows: rows.len(), n_cols: cols.len(), row_ptr, col_idx, values }
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Largest `|A_ij + A_ji|`.
    pub fn skew_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v + self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (i, row) in dense.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        dense
    }
}

/// Triplet accumulator; duplicates are summed on conversion.
#[derive(Debug, Clone)]
pub struct CooMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl CooMatrix {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        CooMatrix { n_rows, n_cols, entries: Vec::new() }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        CooMatrix { n_rows, n_cols, entries: Vec::with_capacity(cap) }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n_rows && j < self.n_cols);
        self.entries.push((i, j, v));
    }

    /// Sorts by (row, column) and sums duplicates. Explicit zeros are kept so
    /// that the pattern does not depend on cancellation.
    pub fn to_csr(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.n_rows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n_rows: self.n_rows, n_cols: self.n_cols, row_ptr, col_idx, values }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

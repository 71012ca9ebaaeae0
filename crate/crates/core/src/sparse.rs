//! Compressed sparse row storage and the direct linear solver backend.

use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use faer::prelude::Solve;

use crate::error::{Error, Result};

/// Relative residual bound every linear solve must meet.
pub const SOLVE_TOL: f64 = 1e-12;

/// Row-major sparse matrix with sorted, duplicate-free rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists; duplicates are summed.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = col_idx.len();
            for (c, v) in row {
                debug_assert!(c < n_cols);
                if col_idx.len() > start && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (cols, vals) = self.row(i);
        cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row_dot(i, x)).collect()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).1.iter().sum()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n_rows())
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n_rows()).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .all(|(&j, &v)| (v - self.get(j, i)).abs() <= tol)
        })
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let mut triplets = Vec::with_capacity(self.nnz());
        for i in 0..self.n_rows() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push(Triplet::new(i, j, v));
            }
        }
        SparseColMat::try_new_from_triplets(self.n_rows(), self.n_cols, &triplets)
            .map_err(|e| Error::Singular(format!("matrix conversion failed: {e:?}")))
    }
}

/// Sparse LU factorization of a square [`CsrMatrix`].
pub struct Factorization<'a> {
    matrix: &'a CsrMatrix,
    lu: Lu<usize, f64>,
}

impl<'a> Factorization<'a> {
    pub fn new(matrix: &'a CsrMatrix) -> Result<Self> {
        if matrix.n_rows() != matrix.n_cols() {
            return Err(Error::Singular(format!(
                "matrix is {}x{}, not square",
                matrix.n_rows(),
                matrix.n_cols()
            )));
        }
        if matrix.n_rows() == 0 {
            return Err(Error::NoInteriorNodes);
        }
        let lu = matrix
            .to_faer()?
            .sp_lu()
            .map_err(|e| Error::Singular(format!("sparse LU failed: {e:?}")))?;
        Ok(Self { matrix, lu })
    }

    /// Solves with one step of iterative refinement when needed; fails if
    /// the relative residual stays above [`SOLVE_TOL`].
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = rhs.len();
        let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
        let sol = self.lu.solve(&b);
        let mut x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("zero pivot: solution is not finite".into()));
        }
        let mut rel = relative_residual(self.matrix, &x, rhs);
        for _ in 0..2 {
            if rel <= SOLVE_TOL {
                break;
            }
            let ax = self.matrix.matvec(&x);
            let r = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i] - ax[i]);
            let dx = self.lu.solve(&r);
            for i in 0..n {
                x[i] += dx[(i, 0)];
            }
            rel = relative_residual(self.matrix, &x, rhs);
        }
        if !(rel <= SOLVE_TOL) {
            return Err(Error::Singular(format!(
                "relative residual {rel:e} exceeds {SOLVE_TOL:e} (matrix inf-norm {:e}, solution inf-norm {:e})",
                self.matrix.norm_inf(),
                max_abs(&x)
            )));
        }
        Ok(x)
    }
}

/// `||A x - b|| / (||A|| ||x|| + ||b||)` in the max norm.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let num = ax.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    let den = a.norm_inf() * max_abs(x) + max_abs(b);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Direct solve of `A x = b`.
pub fn linear_solve(a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    Factorization::new(a)?.solve(rhs)
}

//! Small dense linear algebra kernels: row-major matrices, Gaussian
//! elimination, and a cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Everything here targets the modest problem sizes of this crate
//! (city graphs with tens of nodes, regression normal equations with a
//! handful of unknowns), favouring simplicity and exact reproducibility
//! over asymptotic performance.

use thiserror::Error;

/// Errors from the dense linear algebra kernels.
#[derive(Debug, Error)]
pub enum LinalgError {
    /// Operand shapes are incompatible with the requested operation.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    /// The system matrix is singular to working precision.
    #[error("matrix is singular to working precision (pivot {pivot:.3e} at column {col})")]
    Singular { col: usize, pivot: f64 },
    /// The Jacobi sweep limit was reached before off-diagonals vanished.
    #[error("Jacobi eigensolver failed to converge within {0} sweeps")]
    NoConvergence(usize),
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Creates a `rows`×`cols` matrix of zeros.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Creates the `n`×`n` identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows. All rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.concat() })
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Copies column `j` into a fresh vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Matrix–vector product `A x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "matvec: {}x{} matrix with length-{} vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * x[j]).sum())
            .collect())
    }

    /// Transposed matrix–vector product `Aᵀ x`.
    pub fn transpose_matvec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if x.len() != self.rows {
            return Err(LinalgError::DimensionMismatch(format!(
                "transpose_matvec: {}x{} matrix with length-{} vector",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)] * x[i]).sum())
            .collect())
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Solves the square linear system `A x = b` by Gaussian elimination with
/// partial pivoting.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "solve: {}x{} matrix with length-{} rhs",
            a.rows(),
            a.cols(),
            b.len()
        )));
    }
    let mut m = a.clone();
    let mut x = b.to_vec();
    for col in 0..n {
        let (pivot_row, pivot) = (col..n)
            .map(|r| (r, m[(r, col)].abs()))
            .max_by(|u, v| u.1.total_cmp(&v.1))
            .expect("non-empty pivot scan");
        if pivot < 1e-12 {
            return Err(LinalgError::Singular { col, pivot });
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot_row, j)];
                m[(pivot_row, j)] = tmp;
            }
            x.swap(col, pivot_row);
        }
        for r in col + 1..n {
            let f = m[(r, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[(r, j)] -= f * m[(col, j)];
            }
            x[r] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for j in col + 1..n {
            s -= m[(col, j)] * x[j];
        }
        x[col] = s / m[(col, col)];
    }
    Ok(x)
}

/// Eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEigen {
    /// Eigenvalues, in the order produced by the sweep (unsorted).
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors; column `k` pairs with `values[k]`.
    pub vectors: Matrix,
}

/// Sweep limit for the Jacobi eigensolver. Quadratic convergence makes
/// 6–10 sweeps typical even at n = 100; 50 is a generous safety margin.
const MAX_JACOBI_SWEEPS: usize = 50;

/// Diagonalizes a symmetric matrix with the cyclic Jacobi rotation method.
///
/// Only the upper triangle of `a` is read. Rotations annihilate each
/// off-diagonal entry in turn until the sum of off-diagonal magnitudes
/// underflows to zero, which quadratic convergence guarantees after a few
/// sweeps. Eigenvalues are not sorted; callers impose their own order.
pub fn sym_eigen(a: &Matrix) -> Result<SymEigen, LinalgError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(LinalgError::DimensionMismatch(format!(
            "sym_eigen: {}x{} matrix is not square",
            a.rows(),
            a.cols()
        )));
    }
    if n == 0 {
        return Err(LinalgError::DimensionMismatch("sym_eigen: empty matrix".into()));
    }
    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let mut d: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    let mut b = d.clone();
    let mut z = vec![0.0; n];

    for sweep in 0..MAX_JACOBI_SWEEPS {
        let off: f64 = (0..n - 1)
            .map(|p| (p + 1..n).map(|q| m[(p, q)].abs()).sum::<f64>())
            .sum();
        if off == 0.0 {
            return Ok(SymEigen { values: d, vectors: v });
        }
        // First sweeps only rotate entries above a shrinking threshold;
        // later sweeps rotate everything that has not underflowed.
        let thresh = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n - 1 {
            for q in p + 1..n {
                let g = 100.0 * m[(p, q)].abs();
                if sweep > 3 && d[p].abs() + g == d[p].abs() && d[q].abs() + g == d[q].abs() {
                    // Off-diagonal is negligible relative to both diagonal
                    // entries; zero it outright.
                    m[(p, q)] = 0.0;
                } else if m[(p, q)].abs() > thresh {
                    let h = d[q] - d[p];
                    let t = if h.abs() + g == h.abs() {
                        m[(p, q)] / h
                    } else {
                        let theta = 0.5 * h / m[(p, q)];
                        let mut t = 1.0 / (theta.abs() + (1.0 + theta * theta).sqrt());
                        if theta < 0.0 {
                            t = -t;
                        }
                        t
                    };
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = t * c;
                    let tau = s / (1.0 + c);
                    let h = t * m[(p, q)];
                    z[p] -= h;
                    z[q] += h;
                    d[p] -= h;
                    d[q] += h;
                    m[(p, q)] = 0.0;
                    let rot = |mat: &mut Matrix, i: usize, j: usize, k: usize, l: usize| {
                        let g = mat[(i, j)];
                        let h = mat[(k, l)];
                        mat[(i, j)] = g - s * (h + g * tau);
                        mat[(k, l)] = h + s * (g - h * tau);
                    };
                    for j in 0..p {
                        rot(&mut m, j, p, j, q);
                    }
                    for j in p + 1..q {
                        rot(&mut m, p, j, j, q);
                    }
                    for j in q + 1..n {
                        rot(&mut m, p, j, q, j);
                    }
                    for j in 0..n {
                        rot(&mut v, j, p, j, q);
                    }
                }
            }
        }
        for i in 0..n {
            b[i] += z[i];
            d[i] = b[i];
            z[i] = 0.0;
        }
    }
    Err(LinalgError::NoConvergence(MAX_JACOBI_SWEEPS))
}

//! Small dense linear algebra used by the solvers: Cholesky for the R×R
//! Gram systems and a symmetric eigendecomposition (via nalgebra) for the
//! pseudo-inverse fallback and ST-HOSVD.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: Matrix,
}

impl Cholesky {
    /// Returns `None` when the matrix is not numerically positive definite.
    pub fn factor(a: &Matrix) -> Option<Self> {
        let n = a.rows();
        debug_assert_eq!(n, a.cols());
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a[(j, j)];
            for k in 0..j {
                diag -= l[(j, k)] * l[(j, k)];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return None;
            }
            let ljj = diag.sqrt();
            l[(j, j)] = ljj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Some(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.l.rows();
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[(i, k)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[(k, i)] * b[k];
            }
            b[i] = s / self.l[(i, i)];
        }
    }
}

/// Solver for `X · S = B` with `S` symmetric positive semi-definite, used
/// row by row on factor matrices.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Cholesky(Cholesky),
    /// Truncated symmetric pseudo-inverse.
    Pinv(Matrix),
}

impl SpdSolver {
    /// Factors `s`; if Cholesky fails, falls back to a symmetric
    /// pseudo-inverse that treats eigenvalues below the ridge `1e-12·trace(s)`
    /// as zero. The flag reports whether the fallback was needed.
    pub fn new(s: &Matrix) -> (Self, bool) {
        if let Some(c) = Cholesky::factor(s) {
            return (SpdSolver::Cholesky(c), false);
        }
        let ridge = 1e-12 * s.trace().abs();
        (SpdSolver::Pinv(pseudo_inverse_sym(s, ridge)), true)
    }

    pub fn solve_vec(&self, b: &mut [f64]) {
        match self {
            SpdSolver::Cholesky(c) => c.solve_in_place(b),
            SpdSolver::Pinv(p) => {
                let x: Vec<f64> = (0..p.rows())
                    .map(|i| (0..p.cols()).map(|j| p[(i, j)] * b[j]).sum())
                    .collect();
                b.copy_from_slice(&x);
            }
        }
    }

    /// Returns `B · S⁻¹` (S symmetric, so this solves each row of `B`).
    pub fn solve_rows(&self, b: &Matrix) -> Matrix {
        let mut out = b.clone();
        let mut row = vec![0.0; b.cols()];
        for i in 0..b.rows() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = b[(i, j)];
            }
            self.solve_vec(&mut row);
            for (j, &v) in row.iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
pub fn sym_eigen_desc(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::DimensionMismatch("eigendecomposition of a non-square matrix".into()));
    }
    let m = nalgebra::DMatrix::from_column_slice(n, n, a.as_slice());
    let eig = nalgebra::SymmetricEigen::new(m);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

fn pseudo_inverse_sym(a: &Matrix, ridge: f64) -> Matrix {
    let n = a.rows();
    let (vals, vecs) = match sym_eigen_desc(a) {
        Ok(e) => e,
        Err(_) => return Matrix::zeros(n, n),
    };
    let floor = vals.first().copied().unwrap_or(0.0).abs() * n as f64 * f64::EPSILON;
    let cutoff = ridge.max(floor);
    let mut p = Matrix::zeros(n, n);
    for (k, &lam) in vals.iter().enumerate() {
        if lam <= cutoff {
            continue;
        }
        let v = vecs.col(k);
        for j in 0..n {
            for i in 0..n {
                p[(i, j)] += v[i] * v[j] / lam;
            }
        }
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves() {
        let a = Matrix::from_rows(&[&[4.0, 2.0, 0.4], &[2.0, 3.0, 0.5], &[0.4, 0.5, 2.0]]).unwrap();
        let c = Cholesky::factor(&a).unwrap();
        let x = [1.0, -2.0, 0.5];
        let mut b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[(i, j)] * x[j]).sum()).collect();
        c.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_falls_back_to_pinv() {
        let a = Matrix::from_rows(&[&[1.0, 1.0], &[1.0, 1.0]]).unwrap();
        let (s, warned) = SpdSolver::new(&a);
        assert!(warned);
        // Minimum-norm solution of [1 1; 1 1] x = [2 2] is [1 1].
        let mut b = vec![2.0, 2.0];
        s.solve_vec(&mut b);
        assert!((b[0] - 1.0).abs() < 1e-9 && (b[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eigen_sorted_descending() {
        let a = Matrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap();
        let (vals, vecs) = sym_eigen_desc(&a).unwrap();
        assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
        let g = vecs.gram();
        assert!((g[(0, 1)]).abs() < 1e-14);
    }
}

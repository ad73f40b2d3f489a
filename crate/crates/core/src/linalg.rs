//! Minimal dense linear algebra: a row-major matrix and a Cholesky solver.
//!
//! Only what the ridge regression baseline needs. The systems here are tiny
//! (p+2 unknowns for the linear ridge features), so a plain O(n^3) Cholesky
//! factorization is entirely adequate.

use alloc::vec;
use alloc::vec::Vec;
// Needed for f64 math in no_std builds; in builds where a dependency
// links std, the inherent methods shadow the trait and this goes unused.
#[allow(unused_imports)]
use num_traits::Float;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Create a matrix of zeros.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Create a matrix from a flat row-major buffer.
    ///
    /// # Panics
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "buffer length {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    /// Borrow row `r` as a slice.
    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self^T * self` (Gram matrix of the columns), `cols x cols`.
    pub fn gram_t(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.cols);
        for i in 0..self.cols {
            for j in i..self.cols {
                let mut acc = 0.0;
                for r in 0..self.rows {
                    acc += self.get(r, i) * self.get(r, j);
                }
                out.set(i, j, acc);
                out.set(j, i, acc);
            }
        }
        out
    }

    /// `self^T * y` for a vector `y` of length `rows`.
    pub fn mul_t_vec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            for c in 0..self.cols {
                out[c] += row[c] * y[r];
            }
        }
        out
    }
}

/// Error from the Cholesky factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CholeskyError {
    /// A pivot was non-positive: the matrix is not positive definite.
    NotPositiveDefinite { pivot: usize },
}

impl core::fmt::Display for CholeskyError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CholeskyError::NotPositiveDefinite { pivot } => {
                write!(f, "matrix is not positive definite (pivot {pivot})")
            }
        }
    }
}

impl core::error::Error for CholeskyError {}

/// Solve `A x = b` for symmetric positive definite `A` via Cholesky.
///
/// Only the lower triangle of `A` is read.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>, CholeskyError> {
    assert_eq!(a.rows(), a.cols(), "matrix must be square");
    assert_eq!(b.len(), a.rows(), "rhs length must match matrix order");
    let n = a.rows();
    // Factor A = L L^T, storing L in the lower triangle of `l`.
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            let ljk = l.get(j, k);
            diag -= ljk * ljk;
        }
        if !(diag > 0.0) {
            return Err(CholeskyError::NotPositiveDefinite { pivot: j });
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / ljj);
        }
    }
    // Forward solve L z = b.
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l.get(i, k) * z[k];
        }
        z[i] = v / l.get(i, i);
    }
    // Back solve L^T x = z.
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut v = z[i];
        for k in (i + 1)..n {
            v -= l.get(k, i) * x[k];
        }
        x[i] = v / l.get(i, i);
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cholesky_solves_identity() {
        let a = Matrix::from_rows(2, 2, vec![1.0, 0.0, 0.0, 1.0]);
        let x = cholesky_solve(&a, &[3.0, -4.0]).unwrap();
        assert_eq!(x, vec![3.0, -4.0]);
    }

    #[test]
    fn cholesky_solves_spd_system() {
        // A = [[4,2],[2,3]], b = [10, 9] -> x = [3/2, 2] exactly:
        // 4*1.5 + 2*2 = 10, 2*1.5 + 3*2 = 9.
        let a = Matrix::from_rows(2, 2, vec![4.0, 2.0, 2.0, 3.0]);
        let x = cholesky_solve(&a, &[10.0, 9.0]).unwrap();
        assert!((x[0] - 1.5).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = Matrix::from_rows(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            cholesky_solve(&a, &[1.0, 1.0]),
            Err(CholeskyError::NotPositiveDefinite { pivot: 1 })
        );
    }

    #[test]
    fn gram_and_mul_t_vec() {
        // X = [[1,2],[3,4],[5,6]]
        let x = Matrix::from_rows(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let g = x.gram_t();
        assert_eq!(g.get(0, 0), 35.0); // 1+9+25
        assert_eq!(g.get(0, 1), 44.0); // 2+12+30
        assert_eq!(g.get(1, 0), 44.0);
        assert_eq!(g.get(1, 1), 56.0); // 4+16+36
        let v = x.mul_t_vec(&[1.0, 1.0, 1.0]);
        assert_eq!(v, vec![9.0, 12.0]);
    }

    #[test]
    fn nan_diag_is_rejected() {
        let a = Matrix::from_rows(1, 1, vec![f64::NAN]);
        assert!(cholesky_solve(&a, &[1.0]).is_err());
    }
}

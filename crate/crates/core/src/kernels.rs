//! Kernel evaluation and Gram-matrix construction for the RKHS function
//! class searched by the weighted SVM.
//!
//! Two kernels are provided: the Gaussian kernel
//! `k(x, z) = exp(-||x - z||^2 / (2 sigma^2))` — the form used by all the
//! cross-validated estimators, with `sigma` interpretable as a length
//! scale — and the linear kernel `k(x, z) = <x, z>`, kept for worked
//! examples and brute-force oracle tests.
//!
//! Gram construction against a hyperparameter grid is dominated by pairwise
//! distances, so those are exposed separately: compute
//! [`pairwise_sqdist`] once, then [`gram_from_sqdist`] per bandwidth.

use crate::linalg::Matrix;
// Needed for f64 math in no_std builds; in builds where a dependency
// links std, the inherent methods shadow the trait and this goes unused.
#[allow(unused_imports)]
use num_traits::Float;

/// Kernel family and parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-||x - z||^2 / (2 bandwidth^2))`, `bandwidth > 0`.
    Gaussian { bandwidth: f64 },
    /// `<x, z>`.
    Linear,
}

/// Kernel argument errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelError {
    /// Vectors of different dimension.
    DimensionMismatch { left: usize, right: usize },
    /// Gaussian bandwidth not a positive finite number.
    BadBandwidth { value: f64 },
}

impl core::fmt::Display for KernelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            KernelError::DimensionMismatch { left, right } => {
                write!(f, "vectors have dimensions {left} and {right}")
            }
            KernelError::BadBandwidth { value } => {
                write!(f, "bandwidth must be positive and finite, got {value}")
            }
        }
    }
}

impl core::error::Error for KernelError {}

impl KernelSpec {
    /// Check parameter validity (positive finite bandwidth).
    pub fn validate(&self) -> Result<(), KernelError> {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                if bandwidth > 0.0 && bandwidth.is_finite() {
                    Ok(())
                } else {
                    Err(KernelError::BadBandwidth { value: bandwidth })
                }
            }
            KernelSpec::Linear => Ok(()),
        }
    }

    /// Evaluate without dimension checks (callers validate once up front).
    #[inline]
    fn eval_unchecked(&self, x: &[f64], z: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                gaussian_from_sqdist(squared_distance(x, z), bandwidth)
            }
            KernelSpec::Linear => dot(x, z),
        }
    }
}

#[inline]
fn dot(x: &[f64], z: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), z.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        acc += x[i] * z[i];
    }
    acc
}

/// `||x - z||^2`. Callers must pass equal-length slices.
#[inline]
pub fn squared_distance(x: &[f64], z: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), z.len());
    let mut acc = 0.0;
    for i in 0..x.len() {
        let d = x[i] - z[i];
        acc += d * d;
    }
    acc
}

/// Gaussian kernel value from a precomputed squared distance.
#[inline]
pub fn gaussian_from_sqdist(sqdist: f64, bandwidth: f64) -> f64 {
    (-sqdist / (2.0 * bandwidth * bandwidth)).exp()
}

/// Evaluate `k(x, z)` with argument checking.
pub fn kernel_eval(spec: &KernelSpec, x: &[f64], z: &[f64]) -> Result<f64, KernelError> {
    spec.validate()?;
    if x.len() != z.len() {
        return Err(KernelError::DimensionMismatch {
            left: x.len(),
            right: z.len(),
        });
    }
    Ok(spec.eval_unchecked(x, z))
}

/// Matrix of `k(rows[i], cols[j])`. When `rows` and `cols` are the same
/// points the result is symmetric positive semidefinite up to round-off.
pub fn gram_matrix(spec: &KernelSpec, rows: &Matrix, cols: &Matrix) -> Result<Matrix, KernelError> {
    spec.validate()?;
    if rows.cols() != cols.cols() {
        return Err(KernelError::DimensionMismatch {
            left: rows.cols(),
            right: cols.cols(),
        });
    }
    let mut out = Matrix::zeros(rows.rows(), cols.rows());
    for i in 0..rows.rows() {
        let xi = rows.row(i);
        for j in 0..cols.rows() {
            out.set(i, j, spec.eval_unchecked(xi, cols.row(j)));
        }
    }
    Ok(out)
}

/// Matrix of `||rows[i] - cols[j]||^2`.
///
/// # Panics
///
/// Panics if the point dimensions differ.
pub fn pairwise_sqdist(rows: &Matrix, cols: &Matrix) -> Matrix {
    assert_eq!(rows.cols(), cols.cols(), "point dimensions differ");
    let mut out = Matrix::zeros(rows.rows(), cols.rows());
    for i in 0..rows.rows() {
        let xi = rows.row(i);
        for j in 0..cols.rows() {
            out.set(i, j, squared_distance(xi, cols.row(j)));
        }
    }
    out
}

/// Apply the Gaussian kernel entrywise to a precomputed squared-distance
/// matrix. Equals `gram_matrix` with the corresponding points.
pub fn gram_from_sqdist(sqdist: &Matrix, bandwidth: f64) -> Matrix {
    let mut out = Matrix::zeros(sqdist.rows(), sqdist.cols());
    for i in 0..sqdist.rows() {
        for j in 0..sqdist.cols() {
            out.set(i, j, gaussian_from_sqdist(sqdist.get(i, j), bandwidth));
        }
    }
    out
}

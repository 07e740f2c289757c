//! Dense numerical kernels behind the CCA similarity measure.
//!
//! Everything here is generic over [`Real`](crate::scalar::Real); the analysis
//! pipeline instantiates it with `f64` regardless of the on-disk precision.

mod cca;
mod eigen;
mod matrix;
mod svd;

pub use cca::{cca, CcaResult};
pub use eigen::{inv_sqrt_sym, symmetric_eigen, InvSqrt, SymmetricEigen};
pub use matrix::Matrix;
pub use svd::{svd, Svd};

use thiserror::Error;

use crate::scalar::Real;

/// Default relative spectral truncation for covariance inverse square roots.
pub const DEFAULT_TRUNCATION: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix shape {rows}x{cols} is empty")]
    EmptyShape { rows: usize, cols: usize },
    #[error("matrix {rows}x{cols} needs {} values, got {len}", rows * cols)]
    DataLength {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("non-finite matrix entry at flat index {index}")]
    NonFinite { index: usize },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("row counts differ: {left} vs {right}")]
    RowMismatch { left: usize, right: usize },
    #[error("{rows} rows is too few, need at least {needed}")]
    TooFewRows { rows: usize, needed: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {max_asymmetry:e})")]
    NotSymmetric { max_asymmetry: f64 },
    #[error(
        "matrix is not positive semidefinite (eigenvalue {eigenvalue:e}, largest {largest:e})"
    )]
    NegativeEigenvalue { eigenvalue: f64, largest: f64 },
    #[error("truncation {0} outside [0, 1)")]
    InvalidTruncation(f64),
    #[error("{op} did not converge within {sweeps} sweeps")]
    NoConvergence { op: &'static str, sweeps: usize },
    #[error("degenerate input: effective ranks x={rank_x}, y={rank_y}")]
    Degenerate { rank_x: usize, rank_y: usize },
}

/// Subtracts each column's mean.
pub fn center_columns<T: Real>(m: &Matrix<T>) -> Matrix<T> {
    let (rows, cols) = m.shape();
    let n = T::count(rows);
    let mut means = vec![T::zero(); cols];
    for i in 0..rows {
        for (acc, &v) in means.iter_mut().zip(m.row(i)) {
            *acc = *acc + v;
        }
    }
    for mean in &mut means {
        *mean = *mean / n;
    }
    Matrix::from_fn(rows, cols, |i, j| m[(i, j)] - means[j])
}

/// Cross-covariance `xᵀy / (rows - 1)` of two centered matrices.
pub fn covariance<T: Real>(x: &Matrix<T>, y: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    if x.rows() != y.rows() {
        return Err(LinalgError::RowMismatch {
            left: x.rows(),
            right: y.rows(),
        });
    }
    if x.rows() < 2 {
        return Err(LinalgError::TooFewRows {
            rows: x.rows(),
            needed: 2,
        });
    }
    let divisor = T::count(x.rows() - 1);
    Ok(x.tr_matmul(y)?.scale(T::one() / divisor))
}

/// Auto-covariance with exact symmetry enforced.
pub(crate) fn auto_covariance<T: Real>(x: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    let c = covariance(x, x)?;
    let n = c.rows();
    Ok(Matrix::from_fn(n, n, |i, j| {
        if i <= j {
            c[(i, j)]
        } else {
            c[(j, i)]
        }
    }))
}

use crate::linalg::{
    auto_covariance, center_columns, covariance, inv_sqrt_sym, svd, LinalgError, Matrix,
};
use crate::scalar::Real;

/// Canonical correlations of two variable sets and the transformations
/// that produce the canonical variables.
///
/// `transform_x` has one column per retained direction; applied to the
/// centered `x` it yields canonical variables with identity covariance.
#[derive(Debug, Clone)]
pub struct CcaResult<T> {
    /// Non-increasing, clipped to `[0, 1]`.
    pub correlations: Vec<T>,
    pub transform_x: Matrix<T>,
    pub transform_y: Matrix<T>,
    pub effective_rank_x: usize,
    pub effective_rank_y: usize,
    /// Largest singular value before clipping.
    pub max_unclipped: T,
}

impl<T: Real> CcaResult<T> {
    /// Number of retained canonical directions.
    pub fn k(&self) -> usize {
        self.correlations.len()
    }

    /// Mean canonical correlation over the retained directions.
    pub fn mean_correlation(&self) -> T {
        self.correlations.iter().copied().sum::<T>() / T::count(self.k())
    }
}

/// Canonical correlation analysis of `x` (rows × p) against `y` (rows × q).
///
/// Solved in whitened coordinates: with `Σx^{-1/2}` and `Σy^{-1/2}` from
/// [`inv_sqrt_sym`], the singular values of `Σx^{-1/2} Σxy Σy^{-1/2}` are the
/// canonical correlations and its singular vectors, mapped back through the
/// inverse square roots, give the transforms. Directions dropped by the
/// spectral truncation `trunc` bound the number of correlations reported.
pub fn cca<T: Real>(x: &Matrix<T>, y: &Matrix<T>, trunc: T) -> Result<CcaResult<T>, LinalgError> {
    if x.rows() != y.rows() {
        return Err(LinalgError::RowMismatch {
            left: x.rows(),
            right: y.rows(),
        });
    }
    let needed = x.cols().max(y.cols()) + 1;
    if x.rows() < needed {
        return Err(LinalgError::TooFewRows {
            rows: x.rows(),
            needed,
        });
    }
    if !(trunc >= T::zero() && trunc < T::one()) {
        return Err(LinalgError::InvalidTruncation(trunc.as_f64()));
    }

    let xc = center_columns(x);
    let yc = center_columns(y);
    let sigma_x = auto_covariance(&xc)?;
    let sigma_y = auto_covariance(&yc)?;
    let sigma_xy = covariance(&xc, &yc)?;

    let wx = inv_sqrt_sym(&sigma_x, trunc)?;
    let wy = inv_sqrt_sym(&sigma_y, trunc)?;
    if wx.retained == 0 || wy.retained == 0 {
        return Err(LinalgError::Degenerate {
            rank_x: wx.retained,
            rank_y: wy.retained,
        });
    }

    let whitened = wx.matrix.matmul(&sigma_xy)?.matmul(&wy.matrix)?;
    let dec = svd(&whitened)?;
    let k = wx.retained.min(wy.retained);

    let max_unclipped = dec.singular_values[0];
    let correlations = dec.singular_values[..k]
        .iter()
        .map(|&s| s.max(T::zero()).min(T::one()))
        .collect();
    let transform_x = wx.matrix.matmul(&dec.u.leading_columns(k))?;
    let transform_y = wy.matrix.matmul(&dec.v().leading_columns(k))?;

    Ok(CcaResult {
        correlations,
        transform_x,
        transform_y,
        effective_rank_x: wx.retained,
        effective_rank_y: wy.retained,
        max_unclipped,
    })
}

//! Symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::linalg::{LinalgError, Matrix};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, eigenvalues non-increasing.
/// `vectors` holds the eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

/// Truncated inverse square root of a PSD matrix and the number of
/// eigendirections that survived truncation.
#[derive(Debug, Clone)]
pub struct InvSqrt<T> {
    pub matrix: Matrix<T>,
    pub retained: usize,
}

fn symmetry_tolerance<T: Real>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(64.0))
}

fn check_symmetric<T: Real>(s: &Matrix<T>) -> Result<(), LinalgError> {
    if !s.is_square() {
        return Err(LinalgError::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let n = s.rows();
    let mut worst = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if worst > symmetry_tolerance::<T>() * s.max_abs().max(T::min_positive_value()) {
        return Err(LinalgError::NotSymmetric {
            max_asymmetry: worst.as_f64(),
        });
    }
    Ok(())
}

pub fn symmetric_eigen<T: Real>(s: &Matrix<T>) -> Result<SymmetricEigen<T>, LinalgError> {
    check_symmetric(s)?;
    let n = s.rows();
    // Work on the exactly symmetrized upper triangle.
    let mut a = Matrix::from_fn(n, n, |i, j| if i <= j { s[(i, j)] } else { s[(j, i)] });
    let mut v = Matrix::identity(n);
    let scale = a.frobenius_norm();

    let mut converged = n == 1 || scale == T::zero();
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(LinalgError::NoConvergence {
                op: "symmetric_eigen",
                sweeps: MAX_SWEEPS,
            });
        }
        sweep += 1;

        let off: T = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off.sqrt() <= T::epsilon() * scale {
            break;
        }

        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Rotation would be below rounding noise for both diagonals.
                let small = T::epsilon() * T::lit(0.01);
                if apq.abs() <= small * app.abs().min(aqq.abs())
                    || apq.abs() <= small * small * scale
                {
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (T::lit(2.0) * apq);
                let t = tau.signum() / (tau.abs() + (T::one() + tau * tau).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;
                rotate_columns(&mut a, p, q, c, s);
                rotate_rows(&mut a, p, q, c, s);
                a[(p, q)] = T::zero();
                a[(q, p)] = T::zero();
                rotate_columns(&mut v, p, q, c, s);
            }
        }
        converged = !rotated;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a[(j, j)]
            .partial_cmp(&a[(i, i)])
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

fn rotate_columns<T: Real>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    for k in 0..m.rows() {
        let mp = m[(k, p)];
        let mq = m[(k, q)];
        m[(k, p)] = c * mp - s * mq;
        m[(k, q)] = s * mp + c * mq;
    }
}

fn rotate_rows<T: Real>(m: &mut Matrix<T>, p: usize, q: usize, c: T, s: T) {
    for k in 0..m.cols() {
        let mp = m[(p, k)];
        let mq = m[(q, k)];
        m[(p, k)] = c * mp - s * mq;
        m[(q, k)] = s * mp + c * mq;
    }
}

/// `s^{-1/2}` with eigendirections at or below `trunc * λmax` dropped.
///
/// Dropped directions map to zero, so for rank-deficient `s` the result is
/// the pseudo-inverse square root restricted to the retained subspace.
pub fn inv_sqrt_sym<T: Real>(s: &Matrix<T>, trunc: T) -> Result<InvSqrt<T>, LinalgError> {
    if !(trunc >= T::zero() && trunc < T::one()) {
        return Err(LinalgError::InvalidTruncation(trunc.as_f64()));
    }
    let eig = symmetric_eigen(s)?;
    let n = s.rows();
    let largest = eig.values[0];
    if largest <= T::zero() {
        return Ok(InvSqrt {
            matrix: Matrix::zeros(n, n),
            retained: 0,
        });
    }
    let neg_tol = T::lit(1e-8).max(T::epsilon() * T::lit(1000.0));
    if let Some(&worst) = eig.values.last() {
        if worst < -neg_tol * largest {
            return Err(LinalgError::NegativeEigenvalue {
                eigenvalue: worst.as_f64(),
                largest: largest.as_f64(),
            });
        }
    }

    let cutoff = trunc * largest;
    let weights: Vec<T> = eig
        .values
        .iter()
        .map(|&l| {
            if l > cutoff && l > T::zero() {
                T::one() / l.sqrt()
            } else {
                T::zero()
            }
        })
        .collect();
    let retained = weights.iter().filter(|&&w| w > T::zero()).count();

    let q = &eig.vectors;
    let mut out = Matrix::zeros(n, n);
    for (k, &w) in weights.iter().enumerate() {
        if w == T::zero() {
            continue;
        }
        for i in 0..n {
            let qi = q[(i, k)] * w;
            for j in 0..n {
                out[(i, j)] = out[(i, j)] + qi * q[(j, k)];
            }
        }
    }
    Ok(InvSqrt {
        matrix: out,
        retained,
    })
}

//! Thin singular value decomposition by one-sided (Hestenes) Jacobi.

use crate::linalg::{LinalgError, Matrix};
use crate::scalar::Real;

const MAX_SWEEPS: usize = 80;

/// `m = u · diag(singular_values) · vt` with `k = min(rows, cols)`:
/// `u` is `rows × k`, `vt` is `k × cols`, singular values non-increasing.
#[derive(Debug, Clone)]
pub struct Svd<T> {
    pub u: Matrix<T>,
    pub singular_values: Vec<T>,
    pub vt: Matrix<T>,
}

impl<T: Real> Svd<T> {
    /// `v` with right singular vectors as columns.
    pub fn v(&self) -> Matrix<T> {
        self.vt.transpose()
    }

    pub fn reconstruct(&self) -> Matrix<T> {
        let us = Matrix::from_fn(self.u.rows(), self.u.cols(), |i, j| {
            self.u[(i, j)] * self.singular_values[j]
        });
        us.matmul(&self.vt).expect("conforming factors")
    }
}

pub fn svd<T: Real>(m: &Matrix<T>) -> Result<Svd<T>, LinalgError> {
    if m.rows() >= m.cols() {
        tall_svd(m)
    } else {
        let t = tall_svd(&m.transpose())?;
        Ok(Svd {
            u: t.vt.transpose(),
            singular_values: t.singular_values,
            vt: t.u.transpose(),
        })
    }
}

fn tall_svd<T: Real>(m: &Matrix<T>) -> Result<Svd<T>, LinalgError> {
    let (rows, cols) = m.shape();
    let mut work: Vec<Vec<T>> = (0..cols).map(|j| m.column(j)).collect();
    let mut v: Vec<Vec<T>> = (0..cols)
        .map(|j| {
            (0..cols)
                .map(|i| if i == j { T::one() } else { T::zero() })
                .collect()
        })
        .collect();
    let tol = T::epsilon() * T::count(rows);

    let mut sweep = 0;
    loop {
        if sweep == MAX_SWEEPS {
            return Err(LinalgError::NoConvergence {
                op: "svd",
                sweeps: MAX_SWEEPS,
            });
        }
        sweep += 1;
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let alpha = dot(&work[p], &work[p]);
                let beta = dot(&work[q], &work[q]);
                let gamma = dot(&work[p], &work[q]);
                if gamma == T::zero() || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut work, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<T> = work.iter().map(|col| dot(col, col).sqrt()).collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).expect("finite norms"));
    let singular_values: Vec<T> = order.iter().map(|&j| norms[j]).collect();

    // Columns whose singular value is at rounding level carry no direction;
    // they are replaced by an orthonormal completion.
    let largest = singular_values[0];
    let negligible = largest * T::epsilon() * T::count(rows.max(cols));
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(cols);
    for &j in &order {
        if norms[j] > negligible && norms[j] > T::zero() {
            basis.push(work[j].iter().map(|&x| x / norms[j]).collect());
        } else {
            basis.push(Vec::new());
        }
    }
    complete_orthonormal(&mut basis, rows);

    let u = Matrix::from_fn(rows, cols, |i, j| basis[j][i]);
    let vt = Matrix::from_fn(cols, cols, |i, j| v[order[i]][j]);
    Ok(Svd {
        u,
        singular_values,
        vt,
    })
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn rotate_pair<T: Real>(cols: &mut [Vec<T>], p: usize, q: usize, c: T, s: T) {
    let (head, tail) = cols.split_at_mut(q);
    let (a, b) = (&mut head[p], &mut tail[0]);
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills empty entries of `basis` with unit vectors orthogonal to all others.
fn complete_orthonormal<T: Real>(basis: &mut [Vec<T>], dim: usize) {
    let mut candidate = 0;
    for j in 0..basis.len() {
        if !basis[j].is_empty() {
            continue;
        }
        loop {
            assert!(candidate < dim, "basis completion ran out of candidates");
            let mut e = vec![T::zero(); dim];
            e[candidate] = T::one();
            candidate += 1;
            // Two Gram-Schmidt passes.
            for _ in 0..2 {
                for other in basis.iter().filter(|b| !b.is_empty()) {
                    let proj = dot(&e, other);
                    for (x, &o) in e.iter_mut().zip(other) {
                        *x = *x - proj * o;
                    }
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > T::lit(0.5) {
                basis[j] = e.into_iter().map(|x| x / norm).collect();
                break;
            }
        }
    }
}

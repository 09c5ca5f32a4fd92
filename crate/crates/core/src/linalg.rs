//! Small dense linear algebra on `ndarray` matrices.
//!
//! The matrices handled here are at most a few dozen rows (channel counts and
//! feature dimensions), so the cyclic Jacobi method is used for symmetric
//! eigendecompositions: it is accurate to working precision and has no
//! external dependencies.

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Eigendecomposition `a = vectors · diag(values) · vectorsᵀ` of a symmetric matrix.
///
/// Eigenvalues are sorted in descending order; eigenvectors are the columns of
/// `vectors`, with each column's largest-magnitude entry made positive so the
/// result is reproducible.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Array1<T>,
    pub vectors: Array2<T>,
}

pub fn symmetric_eigen<T: Real>(a: &Array2<T>) -> Result<SymmetricEigen<T>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::param(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("matrix contains non-finite entries"));
    }
    let mut m = a.clone();
    // symmetrise to remove rounding asymmetry in the caller's product
    for i in 0..n {
        for j in (i + 1)..n {
            let s = (m[[i, j]] + m[[j, i]]) * T::of(0.5);
            m[[i, j]] = s;
            m[[j, i]] = s;
        }
    }
    let mut v = Array2::<T>::eye(n);
    let scale = m.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    let eps = T::epsilon();

    for _sweep in 0..100 {
        let off = off_diagonal_norm(&m);
        if off <= eps * scale || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                let theta = (aqq - app) / (T::of(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta == T::zero() { T::one() } else { t };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[[j, j]]
            .partial_cmp(&m[[i, i]])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let mut vectors = Array2::<T>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let pivot =
            col.iter().copied().fold(
                T::zero(),
                |best, x| if x.abs() > best.abs() { x } else { best },
            );
        let sign = if pivot < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        for r in 0..n {
            vectors[[r, dst]] = col[r] * sign;
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

fn off_diagonal_norm<T: Real>(m: &Array2<T>) -> T {
    let n = m.nrows();
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[[i, j]] * m[[i, j]];
            }
        }
    }
    s.sqrt()
}

fn rotate<T: Real>(m: &mut Array2<T>, v: &mut Array2<T>, p: usize, q: usize, c: T, s: T) {
    let n = m.nrows();
    for k in 0..n {
        let mkp = m[[k, p]];
        let mkq = m[[k, q]];
        m[[k, p]] = c * mkp - s * mkq;
        m[[k, q]] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[[p, k]];
        let mqk = m[[q, k]];
        m[[p, k]] = c * mpk - s * mqk;
        m[[q, k]] = s * mpk + c * mqk;
    }
    m[[p, q]] = T::zero();
    m[[q, p]] = T::zero();
    for k in 0..n {
        let vkp = v[[k, p]];
        let vkq = v[[k, q]];
        v[[k, p]] = c * vkp - s * vkq;
        v[[k, q]] = s * vkp + c * vkq;
    }
}

/// Inverse of a general square matrix by Gauss-Jordan elimination with partial pivoting.
pub fn inverse<T: Real>(a: &Array2<T>) -> Result<Array2<T>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::param("inverse needs a square matrix"));
    }
    let mut m = a.clone();
    let mut inv = Array2::<T>::eye(n);
    let scale = a.iter().fold(T::zero(), |acc, &x| acc.max(x.abs()));
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                m[[i, col]]
                    .abs()
                    .partial_cmp(&m[[j, col]].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        let pivot = m[[pivot_row, col]];
        if pivot.abs() <= scale * T::epsilon() * T::of_usize(n) {
            return Err(Error::Degenerate(format!(
                "matrix is singular (pivot {} in column {col})",
                pivot
            )));
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap([pivot_row, k], [col, k]);
                inv.swap([pivot_row, k], [col, k]);
            }
        }
        let inv_pivot = T::one() / pivot;
        for k in 0..n {
            m[[col, k]] *= inv_pivot;
            inv[[col, k]] *= inv_pivot;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[[r, col]];
            if f == T::zero() {
                continue;
            }
            for k in 0..n {
                let mv = m[[col, k]];
                let iv = inv[[col, k]];
                m[[r, k]] -= f * mv;
                inv[[r, k]] -= f * iv;
            }
        }
    }
    Ok(inv)
}

/// `(a)^{-1/2}` for a symmetric positive definite matrix.
pub fn inverse_sqrt_spd<T: Real>(a: &Array2<T>) -> Result<Array2<T>> {
    let eig = symmetric_eigen(a)?;
    let largest = eig.values[0];
    let smallest = eig.values[eig.values.len() - 1];
    if !(smallest > T::zero()) || smallest <= largest * T::epsilon() {
        return Err(Error::Degenerate(format!(
            "matrix is not positive definite (eigenvalues {} .. {})",
            smallest, largest
        )));
    }
    let d = eig.values.mapv(|l| T::one() / l.sqrt());
    let scaled = &eig.vectors * &d.insert_axis(Axis(0));
    Ok(scaled.dot(&eig.vectors.t()))
}

/// 2-norm condition number `σ_max / σ_min` of a square matrix.
pub fn condition_number<T: Real>(a: &Array2<T>) -> Result<T> {
    let gram = a.t().dot(a);
    let eig = symmetric_eigen(&gram)?;
    let hi = eig.values[0].max(T::zero()).sqrt();
    let lo = eig.values[eig.values.len() - 1].max(T::zero()).sqrt();
    if lo == T::zero() {
        return Ok(T::infinity());
    }
    Ok(hi / lo)
}

/// Sample covariance of the rows of `x` (variables in rows, observations in
/// columns) using the `1/n` normalisation. `x` is assumed centred.
pub fn row_covariance<T: Real>(x: &Array2<T>) -> Array2<T> {
    let n = T::of_usize(x.ncols());
    x.dot(&x.t()) / n
}

/// Frobenius norm of `a - I`.
pub fn distance_from_identity<T: Real>(a: &Array2<T>) -> T {
    let mut s = T::zero();
    for ((i, j), &v) in a.indexed_iter() {
        let d = if i == j { v - T::one() } else { v };
        s += d * d;
    }
    s.sqrt()
}

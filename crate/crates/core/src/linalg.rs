//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which a matrix is treated as singular.
pub const EIGEN_FLOOR: f64 = 1e-12;

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

/// Returns `(A + Aᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigendecomposition of an SPD matrix, rejecting anything whose smallest
/// eigenvalue is not above `EIGEN_FLOOR` times the largest.
fn spd_eigen(m: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || !(min > EIGEN_FLOOR * max) || !min.is_finite() || !max.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(eig)
}

fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> Result<DMatrix<f64>> {
    let eig = spd_eigen(m)?;
    let vals = eig.eigenvalues.map(f);
    let v = &eig.eigenvectors;
    Ok(symmetrize(&(v * DMatrix::from_diagonal(&vals) * v.transpose())))
}

/// Symmetric positive definite square root.
pub fn spd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spectral_map(m, f64::sqrt)
}

/// Symmetric positive definite inverse square root.
pub fn spd_inv_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    spectral_map(m, |x| 1.0 / x.sqrt())
}

/// Clamps the eigenvalues of a symmetric matrix into `[lo, hi]`. This is the
/// Frobenius-norm projection onto `{S : lo·I ≼ S ≼ hi·I}`.
pub fn clamp_spectrum(m: &DMatrix<f64>, lo: f64, hi: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let vals = eig.eigenvalues.map(|x| x.clamp(lo, hi));
    let v = &eig.eigenvectors;
    symmetrize(&(v * DMatrix::from_diagonal(&vals) * v.transpose()))
}

/// Operator norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_op_norm(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Operator norm of an arbitrary square matrix (largest singular value).
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0_f64, |acc, x| acc.max(*x))
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.norm()
}

/// `n * (n + 1) / 2` upper-triangular coordinates, row-major with `i ≤ j`.
pub fn upper_triangle(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Inverse of [`upper_triangle`].
pub fn from_upper_triangle(d: usize, coords: &[f64]) -> DMatrix<f64> {
    debug_assert_eq!(coords.len(), d * (d + 1) / 2);
    let mut m = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            m[(i, j)] = coords[k];
            m[(j, i)] = coords[k];
            k += 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let r = spd_sqrt(&m).unwrap();
        assert!((&r * &r - &m).norm() < 1e-12);
        let ir = spd_inv_sqrt(&m).unwrap();
        assert!((&ir * &m * &ir - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn singular_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(spd_sqrt(&m), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn triangle_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let c = upper_triangle(&m);
        assert_eq!(c, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(from_upper_triangle(3, &c), m);
    }
}

//! Dense symmetric-matrix helpers on top of nalgebra.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Largest condition number accepted before a matrix is reported singular.
pub const MAX_CONDITION: f64 = 1e14;

/// Spectral condition number `λmax / λmin` of a symmetric matrix
/// (infinite when `λmin ≤ 0`).
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

/// Eigenvector of the smallest eigenvalue.
pub fn null_direction(m: &DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let idx = eig.eigenvalues.imin();
    eig.eigenvectors.column(idx).iter().copied().collect()
}

/// Inverse of a symmetric positive-definite matrix via its eigen
/// decomposition, with the condition number.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.max();
    let min_idx = eig.eigenvalues.imin();
    let min = eig.eigenvalues[min_idx];
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Singular {
            condition,
            direction: eig.eigenvectors.column(min_idx).iter().copied().collect(),
        });
    }
    let inv_vals = eig.eigenvalues.map(|v| 1.0 / v);
    let inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    Ok((symmetrize(inv), condition))
}

pub fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(alloc::vec![2.0, 4.0]));
        let (inv, cond) = spd_inverse(&m).unwrap();
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((inv[(1, 1)] - 0.25).abs() < 1e-15);
        assert!((cond - 2.0).abs() < 1e-12);
    }

    #[test]
    fn singular_reports_null_direction() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match spd_inverse(&m) {
            Err(Error::Singular { direction, .. }) => {
                let s = core::f64::consts::FRAC_1_SQRT_2;
                assert!((direction[0].abs() - s).abs() < 1e-12);
                assert!((direction[0] + direction[1]).abs() < 1e-12);
            }
            other => panic!("expected singular error, got {other:?}"),
        }
    }
}

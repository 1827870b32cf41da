//! Covariance-matrix description of the probe and the closed-form
//! three-parameter quantum Fisher information.
//!
//! Conventions: ħ = 1, quadratures `x = (a + a†)/√2`, `p = (a - a†)/(√2 i)`,
//! so the vacuum covariance is `I/2`. Two-mode matrices use the basis
//! `(x₁, p₁, x₂, p₂)`; the loss embedding uses the block layout
//! `(signal₁, ancilla₁, signal₂, ancilla₂)`.

use alloc::string::ToString;
use alloc::vec;

use nalgebra::{DMatrix, Matrix2, Matrix3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fisher::FisherMatrix;
use crate::linalg;
use crate::params::Param;

/// Real symmetric `2k × 2k` quadrature covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    entries: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() || entries.nrows() % 2 != 0 {
            return Err(Error::InvalidArgument("covariance matrix must be 2k x 2k"));
        }
        if linalg::max_asymmetry(&entries) > 1e-14 * (1.0 + entries.amax()) {
            return Err(Error::InvalidArgument("covariance matrix must be symmetric"));
        }
        Ok(CovarianceMatrix { entries })
    }

    pub fn vacuum(modes: usize) -> Self {
        CovarianceMatrix {
            entries: DMatrix::identity(2 * modes, 2 * modes) * 0.5,
        }
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn modes(&self) -> usize {
        self.entries.nrows() / 2
    }

    /// Mean photon number of mode `k`: `(σ_xx + σ_pp - 1)/2`.
    pub fn mean_photons(&self, k: usize) -> f64 {
        let i = 2 * k;
        0.5 * (self.entries[(i, i)] + self.entries[(i + 1, i + 1)] - 1.0)
    }

    /// Smallest eigenvalue of `σ + iΩ/2`, computed on its real
    /// `[[σ, -Ω/2], [Ω/2, σ]]` embedding.
    pub fn uncertainty_margin(&self) -> f64 {
        let d = self.entries.nrows();
        let omega = symplectic_form(d / 2) * 0.5;
        let mut real = DMatrix::zeros(2 * d, 2 * d);
        real.view_mut((0, 0), (d, d)).copy_from(&self.entries);
        real.view_mut((d, d), (d, d)).copy_from(&self.entries);
        real.view_mut((0, d), (d, d)).copy_from(&(-&omega));
        real.view_mut((d, 0), (d, d)).copy_from(&omega);
        linalg::min_eigenvalue(&real)
    }

    pub fn is_physical(&self, tol: f64) -> bool {
        self.uncertainty_margin() >= -tol
    }
}

/// `Ω = ⊕ₖ [[0, 1], [-1, 0]]`.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// `S_φ = [[cos φ, sin φ], [sin φ, -cos φ]]`; `S_φ² = I`.
pub fn s_phi(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, s, s, -c)
}

pub fn tmsv_covariance(r: f64, phi: f64) -> Result<CovarianceMatrix> {
    if !(r >= 0.0 && r.is_finite()) {
        return Err(Error::Domain {
            name: "r",
            value: r,
            domain: "[0, inf)",
        });
    }
    let diag = 0.5 * (2.0 * r).cosh();
    let off = s_phi(phi) * (-0.5 * (2.0 * r).sinh());
    let mut m = DMatrix::identity(4, 4) * diag;
    m.view_mut((0, 2), (2, 2)).copy_from(&off);
    m.view_mut((2, 0), (2, 2)).copy_from(&off);
    Ok(CovarianceMatrix { entries: m })
}

/// Beam splitter acting on (signal, ancilla) quadratures:
/// `[[ηI, √(1-η²)I], [-√(1-η²)I, ηI]]`.
pub fn beamsplitter_symplectic(eta: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain {
            name: "eta",
            value: eta,
            domain: "[0, 1]",
        });
    }
    let leak = (1.0 - eta * eta).sqrt();
    let mut f = DMatrix::identity(4, 4) * eta;
    for i in 0..2 {
        f[(i, i + 2)] = leak;
        f[(i + 2, i)] = -leak;
    }
    Ok(f)
}

/// Inserts a vacuum ancilla after each signal mode, giving the
/// (signal₁, ancilla₁, signal₂, ancilla₂, ...) layout.
pub fn embed_with_ancillas(cov: &CovarianceMatrix) -> DMatrix<f64> {
    let k = cov.modes();
    let mut out = DMatrix::identity(4 * k, 4 * k) * 0.5;
    for i in 0..k {
        for j in 0..k {
            let block = cov.entries.view((2 * i, 2 * j), (2, 2));
            out.view_mut((4 * i, 4 * j), (2, 2)).copy_from(&block);
        }
    }
    out
}

/// Independent loss on both modes of a two-mode state: ancilla embedding,
/// beam splitters, then the partial trace over the ancillas.
pub fn apply_loss(cov: &CovarianceMatrix, eta1: f64, eta2: f64) -> Result<CovarianceMatrix> {
    if cov.modes() != 2 {
        return Err(Error::InvalidArgument("apply_loss expects a two-mode covariance matrix"));
    }
    let mut s = DMatrix::zeros(8, 8);
    s.view_mut((0, 0), (4, 4)).copy_from(&beamsplitter_symplectic(eta1)?);
    s.view_mut((4, 4), (4, 4)).copy_from(&beamsplitter_symplectic(eta2)?);
    let embedded = embed_with_ancillas(cov);
    let evolved = &s * embedded * s.transpose();
    let keep = [0usize, 1, 4, 5];
    let reduced = DMatrix::from_fn(4, 4, |i, j| evolved[(keep[i], keep[j])]);
    Ok(CovarianceMatrix {
        entries: linalg::symmetrize(reduced),
    })
}

/// Closed-form covariance of the lossy two-mode squeezed vacuum.
pub fn lossy_tmsv_covariance(r: f64, phi: f64, eta1: f64, eta2: f64) -> Result<CovarianceMatrix> {
    let c = (2.0 * r).cosh();
    let s = (2.0 * r).sinh();
    let mut m = DMatrix::zeros(4, 4);
    let d1 = 0.5 * ((c - 1.0) * eta1 * eta1 + 1.0);
    let d2 = 0.5 * ((c - 1.0) * eta2 * eta2 + 1.0);
    m.view_mut((0, 0), (2, 2)).copy_from(&(Matrix2::identity() * d1));
    m.view_mut((2, 2), (2, 2)).copy_from(&(Matrix2::identity() * d2));
    let off = s_phi(phi) * (-0.5 * eta1 * eta2 * s);
    m.view_mut((0, 2), (2, 2)).copy_from(&off);
    m.view_mut((2, 0), (2, 2)).copy_from(&off);
    CovarianceMatrix::new(m)
}

/// Inverse quantum Fisher information matrix in the `(η₁, η₂, r)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfimInverse {
    entries: Matrix3<f64>,
}

impl QfimInverse {
    pub fn entries(&self) -> &Matrix3<f64> {
        &self.entries
    }

    /// Per-shot variance bounds `(Var η₁, Var η₂, Var r)`.
    pub fn diagonal(&self) -> [f64; 3] {
        [self.entries[(0, 0)], self.entries[(1, 1)], self.entries[(2, 2)]]
    }

    /// `Var η₁ + Var η₂`.
    pub fn total_variance(&self) -> f64 {
        self.entries[(0, 0)] + self.entries[(1, 1)]
    }

    /// The QFIM itself, by numerical inversion, with its condition number.
    pub fn qfim(&self) -> Result<(FisherMatrix, f64)> {
        let m = DMatrix::from_iterator(3, 3, self.entries.iter().copied());
        let (inv, cond) = linalg::spd_inverse(&m)?;
        let labels = vec![
            Param::Eta1.name().to_string(),
            Param::Eta2.name().to_string(),
            Param::R.name().to_string(),
        ];
        Ok((FisherMatrix::new(labels, inv)?, cond))
    }
}

pub fn qfim_inverse_analytic(eta1: f64, eta2: f64, r: f64) -> Result<QfimInverse> {
    for (name, v) in [("eta1", eta1), ("eta2", eta2)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Domain {
                name,
                value: v,
                domain: "(0, 1]",
            });
        }
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain {
            name: "r",
            value: r,
            domain: "(0, inf)",
        });
    }
    let (a1, a2) = (1.0 - eta1 * eta1, 1.0 - eta2 * eta2);
    let coth = 1.0 / r.tanh();
    let csch2 = 1.0 / r.sinh().powi(2);
    let v11 = a1 * (1.0 + csch2 - eta2 * eta2) / (4.0 * eta2 * eta2);
    let v22 = a2 * (1.0 + csch2 - eta1 * eta1) / (4.0 * eta1 * eta1);
    let v12 = a1 * a2 * coth * coth / (4.0 * eta1 * eta2);
    let v13 = -a1 * a2 * coth / (4.0 * eta1 * eta2 * eta2);
    let v23 = -a1 * a2 * coth / (4.0 * eta1 * eta1 * eta2);
    let v33 = 0.5 + (1.0 - eta1 * eta1 - eta2 * eta2) / (4.0 * eta1 * eta1 * eta2 * eta2);
    Ok(QfimInverse {
        entries: Matrix3::new(v11, v12, v13, v12, v22, v23, v13, v23, v33),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_tmsv() {
        let cov = tmsv_covariance(0.0, 0.3).unwrap();
        assert!((cov.entries() - DMatrix::identity(4, 4) * 0.5).amax() < 1e-15);
    }

    #[test]
    fn tmsv_entries_at_r1() {
        let cov = tmsv_covariance(1.0, 0.0).unwrap();
        assert!((cov.entries()[(0, 0)] - 1.8810978).abs() < 1e-7);
        assert!((cov.entries()[(0, 2)] + 1.8134302).abs() < 1e-7);
        assert!(cov.is_physical(1e-10));
    }

    #[test]
    fn s_phi_squares_to_identity() {
        for phi in [0.0, 0.4, 1.7, -2.9] {
            assert!((s_phi(phi) * s_phi(phi) - Matrix2::identity()).amax() < 1e-15);
        }
    }

    #[test]
    fn beamsplitter_limits() {
        assert_eq!(beamsplitter_symplectic(1.0).unwrap(), DMatrix::identity(4, 4));
        let swap = beamsplitter_symplectic(0.0).unwrap();
        assert_eq!(swap[(0, 2)], 1.0);
        assert_eq!(swap[(2, 0)], -1.0);
        assert_eq!(swap[(0, 0)], 0.0);
        let f = beamsplitter_symplectic(0.6).unwrap();
        assert!((&f * f.transpose() - DMatrix::identity(4, 4)).amax() < 1e-15);
        assert!(beamsplitter_symplectic(1.2).is_err());
    }

    #[test]
    fn loss_limits() {
        let cov = tmsv_covariance(0.8, 0.5).unwrap();
        let same = apply_loss(&cov, 1.0, 1.0).unwrap();
        assert!((same.entries() - cov.entries()).amax() < 1e-15);
        let vac = apply_loss(&tmsv_covariance(0.0, 0.0).unwrap(), 0.3, 0.9).unwrap();
        assert!((vac.entries() - DMatrix::identity(4, 4) * 0.5).amax() < 1e-15);
        let lossy = apply_loss(&tmsv_covariance(1.0, 0.0).unwrap(), 0.5, 0.7).unwrap();
        assert!((lossy.entries()[(0, 0)] - 0.8452745).abs() < 1e-7);
    }

    #[test]
    fn table_one_bounds() {
        let inv = qfim_inverse_analytic(0.39202, 0.38206, 1.3).unwrap();
        let [v1, v2, vr] = inv.diagonal();
        assert!((v1 - 1.7404).abs() < 5e-4);
        assert!((v2 - 1.6574).abs() < 5e-4);
        assert!((vr - 8.305).abs() < 5e-3);
        assert!((inv.entries()[(0, 1)] - 1.6245).abs() < 5e-4);
    }

    #[test]
    fn rejects_zero_squeezing() {
        assert!(qfim_inverse_analytic(0.5, 0.5, 0.0).is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::linalg::{self, c, CMat4, C64};

/// Default tolerances for accepting a matrix as a density matrix.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-8;

/// Deviations of a matrix from the density-matrix conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityDiagnostics {
    pub hermiticity: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl DensityDiagnostics {
    pub fn is_valid(&self, herm_tol: f64, trace_tol: f64, pos_tol: f64) -> bool {
        self.hermiticity <= herm_tol && self.trace_error <= trace_tol && self.min_eigenvalue >= -pos_tol
    }
}

pub fn diagnose(m: &CMat4) -> DensityDiagnostics {
    let herm = linalg::hermiticity_error(m);
    let sym = (m + m.adjoint()) * c(0.5, 0.0);
    DensityDiagnostics {
        hermiticity: herm,
        trace_error: (linalg::trace(m) - c(1.0, 0.0)).norm(),
        min_eigenvalue: sym.symmetric_eigenvalues().min(),
    }
}

/// A 4x4 density matrix in the site (or computational) basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(CMat4);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity with the default tolerances.
    pub fn new(m: CMat4) -> Result<Self> {
        let d = diagnose(&m);
        if !d.is_valid(HERMITIAN_TOL, TRACE_TOL, POSITIVITY_TOL) {
            return domain(format!(
                "not a density matrix: hermiticity {:.2e}, trace error {:.2e}, min eigenvalue {:.2e}",
                d.hermiticity, d.trace_error, d.min_eigenvalue
            ));
        }
        Ok(DensityMatrix(m))
    }

    /// Wraps solver output without checks; use [`DensityMatrix::diagnostics`] to audit.
    pub fn from_unchecked(m: CMat4) -> Self {
        DensityMatrix(m)
    }

    /// Pure state localised on one site (0-based).
    pub fn site(index: usize) -> Result<Self> {
        if index >= 4 {
            return domain(format!("site index {index} out of range 0..4"));
        }
        let mut m = CMat4::zeros();
        m[(index, index)] = c(1.0, 0.0);
        Ok(DensityMatrix(m))
    }

    /// `|psi><psi|` for a (not necessarily normalised) state vector.
    pub fn pure(psi: [C64; 4]) -> Result<Self> {
        let n: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(n > 0.0) {
            return domain("zero state vector");
        }
        let m = CMat4::from_fn(|i, j| psi[i] * psi[j].conj() / n);
        Ok(DensityMatrix(m))
    }

    pub fn matrix(&self) -> &CMat4 {
        &self.0
    }

    pub fn into_matrix(self) -> CMat4 {
        self.0
    }

    pub fn populations(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.0[(i, i)].re)
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.0)
    }

    pub fn purity(&self) -> f64 {
        linalg::trace(&(self.0 * self.0)).re
    }

    pub fn diagnostics(&self) -> DensityDiagnostics {
        diagnose(&self.0)
    }

    /// `U rho U^dagger`.
    pub fn evolve(&self, u: &CMat4) -> Self {
        DensityMatrix(u * self.0 * u.adjoint())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_state_is_valid() {
        let rho = DensityMatrix::site(2).unwrap();
        assert_eq!(rho.populations(), [0.0, 0.0, 1.0, 0.0]);
        assert!((rho.purity() - 1.0).abs() < 1e-15);
        assert!(DensityMatrix::new(*rho.matrix()).is_ok());
    }

    #[test]
    fn rejects_non_physical() {
        let mut m = CMat4::zeros();
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        let mut m = CMat4::zeros();
        m[(0, 0)] = c(0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
        let mut m = CMat4::identity() * c(0.25, 0.0);
        m[(0, 1)] = c(0.1, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }

    #[test]
    fn pure_state_normalises() {
        let rho = DensityMatrix::pure([c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((rho.matrix()[(0, 1)] - c(0.0, -0.5)).norm() < 1e-15);
        assert!(DensityMatrix::new(*rho.matrix()).is_ok());
    }
}

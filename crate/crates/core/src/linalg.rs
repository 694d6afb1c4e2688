//! Small dense linear algebra helpers for 4x4 (two-qubit / four-site) operators.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat4 = Matrix4<C64>;
pub type RMat4 = Matrix4<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Single-qubit Pauli labels, `Id` included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    Id,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::Id, Pauli::X, Pauli::Y, Pauli::Z];

    pub fn matrix(self) -> Matrix2<C64> {
        match self {
            Pauli::Id => Matrix2::new(ONE, ZERO, ZERO, ONE),
            Pauli::X => Matrix2::new(ZERO, ONE, ONE, ZERO),
            Pauli::Y => Matrix2::new(ZERO, -I, I, ZERO),
            Pauli::Z => Matrix2::new(ONE, ZERO, ZERO, -ONE),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::Id => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Kronecker product of two 2x2 matrices, first factor is the left (most significant) qubit.
pub fn kron2(a: &Matrix2<C64>, b: &Matrix2<C64>) -> CMat4 {
    let mut out = CMat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out[(2 * i + k, 2 * j + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

pub fn pauli2(a: Pauli, b: Pauli) -> CMat4 {
    kron2(&a.matrix(), &b.matrix())
}

pub fn to_complex(m: &RMat4) -> CMat4 {
    m.map(|x| C64::new(x, 0.0))
}

/// `exp(-i H dt)` for a real symmetric `H`.
pub fn expm_real_symmetric(h: &RMat4, dt: f64) -> CMat4 {
    let eig = h.symmetric_eigen();
    let mut out = CMat4::zeros();
    let phases: [C64; 4] = std::array::from_fn(|k| C64::from_polar(1.0, -eig.eigenvalues[k] * dt));
    let v = &eig.eigenvectors;
    for i in 0..4 {
        for j in 0..4 {
            let mut s = ZERO;
            for k in 0..4 {
                s += phases[k] * (v[(i, k)] * v[(j, k)]);
            }
            out[(i, j)] = s;
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian 4x4 matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vector4<f64>,
    pub vectors: CMat4,
}

impl HermitianEigen {
    pub fn new(h: &CMat4) -> Self {
        let eig = h.symmetric_eigen();
        HermitianEigen {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    /// `exp(-i H dt)`.
    pub fn propagator(&self, dt: f64) -> CMat4 {
        let v = &self.vectors;
        let mut scaled = *v;
        for k in 0..4 {
            let p = C64::from_polar(1.0, -self.values[k] * dt);
            for i in 0..4 {
                scaled[(i, k)] *= p;
            }
        }
        scaled * v.adjoint()
    }
}

pub fn expm_hermitian(h: &CMat4, dt: f64) -> CMat4 {
    HermitianEigen::new(h).propagator(dt)
}

pub fn commutator(a: &CMat4, b: &CMat4) -> CMat4 {
    a * b - b * a
}

/// Largest absolute entry of `A - A^dagger`.
pub fn hermiticity_error(a: &CMat4) -> f64 {
    (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest absolute entry of `U^dagger U - 1`.
pub fn unitarity_error(u: &CMat4) -> f64 {
    (u.adjoint() * u - CMat4::identity())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn trace(a: &CMat4) -> C64 {
    a[(0, 0)] + a[(1, 1)] + a[(2, 2)] + a[(3, 3)]
}

/// Difference between the largest and smallest eigenvalue of a real symmetric matrix.
pub fn spectral_spread(h: &RMat4) -> f64 {
    let ev = h.symmetric_eigenvalues();
    ev.max() - ev.min()
}

/// `H - Tr(H)/4`: removes the part of a Hamiltonian that only contributes a global phase.
pub fn traceless(h: &RMat4) -> RMat4 {
    let shift = h.trace() / 4.0;
    h - RMat4::identity() * shift
}

pub fn max_abs_diff(a: &CMat4, b: &CMat4) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_hermitian(seed: u64) -> CMat4 {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = CMat4::from_fn(|_, _| c(next(), next()));
        (m + m.adjoint()) * c(0.5, 0.0)
    }

    #[test]
    fn propagator_matches_pade_exponential() {
        for seed in 0..10 {
            let h = random_hermitian(seed) * c(3.0, 0.0);
            let u = expm_hermitian(&h, 0.7);
            let reference = (h * c(0.0, -0.7)).exp();
            assert!(max_abs_diff(&u, &reference) < 1e-12);
            assert!(unitarity_error(&u) < 1e-13);
        }
    }

    #[test]
    fn real_symmetric_path_agrees_with_complex_path() {
        let h = RMat4::from_fn(|i, j| ((i * 3 + j * 3) % 7) as f64 + if i == j { i as f64 * 4.0 } else { 0.0 });
        let u1 = expm_real_symmetric(&h, 0.3);
        let u2 = expm_hermitian(&to_complex(&h), 0.3);
        assert!(max_abs_diff(&u1, &u2) < 1e-13);
    }

    #[test]
    fn pauli_algebra() {
        let xy = Pauli::X.matrix() * Pauli::Y.matrix();
        assert!((xy - Pauli::Z.matrix() * I).norm() < 1e-15);
        let zz = pauli2(Pauli::Z, Pauli::Z);
        assert_eq!(zz[(1, 1)], -ONE);
        assert_eq!(zz[(3, 3)], ONE);
        let zi = pauli2(Pauli::Z, Pauli::Id);
        assert_eq!(zi[(2, 2)], -ONE);
        assert_eq!(zi[(1, 1)], ONE);
    }
}

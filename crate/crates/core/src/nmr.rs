//! Two-spin liquid-state NMR: internal Hamiltonian, pseudo-pure preparation,
//! free-induction-decay readout and state tomography.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::linalg::{self, c, kron2, pauli2, CMat4, Pauli, C64};
use crate::model::units::hz;
use crate::model::DensityMatrix;

/// Two heteronuclear spins with scalar coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinSystem {
    /// Rotating-frame offsets of spins 1 and 2 (rad/s).
    pub offsets: [f64; 2],
    /// Scalar coupling in Hz.
    pub j_coupling_hz: f64,
    /// Gyromagnetic ratios of the two species (rad s^-1 T^-1).
    pub gamma_h: f64,
    pub gamma_c: f64,
    /// Thermal polarisation prefactor (rad^-1 s T).
    pub polarization: f64,
    /// Pseudo-pure fraction.
    pub pseudo_pure_delta: f64,
}

impl Default for SpinSystem {
    fn default() -> Self {
        SpinSystem {
            offsets: [hz(2000.0), hz(5000.0)],
            j_coupling_hz: 215.1,
            gamma_h: 2.675e8,
            gamma_c: 6.728e7,
            polarization: 1.496e-13,
            pseudo_pure_delta: 1e-5,
        }
    }
}

impl SpinSystem {
    /// `w1/2 Z(x)I + w2/2 I(x)Z + pi J/2 Z(x)Z`.
    pub fn h_int(&self) -> CMat4 {
        let zz = std::f64::consts::PI * self.j_coupling_hz / 2.0;
        pauli2(Pauli::Z, Pauli::Id) * c(self.offsets[0] / 2.0, 0.0)
            + pauli2(Pauli::Id, Pauli::Z) * c(self.offsets[1] / 2.0, 0.0)
            + pauli2(Pauli::Z, Pauli::Z) * c(zz, 0.0)
    }

    /// Diagonal of `h_int` (it is diagonal in the computational basis).
    pub fn energies(&self) -> [f64; 4] {
        let h = self.h_int();
        std::array::from_fn(|i| h[(i, i)].re)
    }

    /// Control time long enough for a full coupling period, `2 pi / (pi J / 2)`.
    pub fn default_control_duration(&self) -> f64 {
        4.0 / self.j_coupling_hz
    }

    /// Peak frequencies `w_k + (-1)^p pi J`, indexed `[k][p]`.
    pub fn peak_frequencies(&self) -> [[f64; 2]; 2] {
        let pj = std::f64::consts::PI * self.j_coupling_hz;
        [
            [self.offsets[0] + pj, self.offsets[0] - pj],
            [self.offsets[1] + pj, self.offsets[1] - pj],
        ]
    }

    /// High-temperature equilibrium state `I/4 + eps (gamma_H Z(x)I + gamma_C I(x)Z)`.
    pub fn thermal_state(&self) -> DensityMatrix {
        let m = CMat4::identity() * c(0.25, 0.0)
            + pauli2(Pauli::Z, Pauli::Id) * c(self.polarization * self.gamma_h, 0.0)
            + pauli2(Pauli::Id, Pauli::Z) * c(self.polarization * self.gamma_c, 0.0);
        DensityMatrix::from_unchecked(m)
    }
}

/// `(1 - delta)/4 I + delta |00><00|`.
pub fn prepare_pseudo_pure(spin: &SpinSystem) -> Result<DensityMatrix> {
    let d = spin.pseudo_pure_delta;
    if !(d > 0.0 && d <= 1.0) {
        return domain(format!("pseudo-pure fraction must lie in (0, 1], got {d}"));
    }
    let mut m = CMat4::identity() * c((1.0 - d) / 4.0, 0.0);
    m[(0, 0)] += c(d, 0.0);
    DensityMatrix::new(m)
}

/// Single-qubit readout rotation: identity or a pi/2 pulse about x or y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub enum Rotation {
    I,
    X,
    Y,
}

impl Rotation {
    fn matrix(self) -> nalgebra::Matrix2<C64> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match self {
            Rotation::I => Pauli::Id.matrix(),
            Rotation::X => Pauli::Id.matrix() * c(s, 0.0) - Pauli::X.matrix() * c(0.0, s),
            Rotation::Y => Pauli::Id.matrix() * c(s, 0.0) - Pauli::Y.matrix() * c(0.0, s),
        }
    }
}

/// Readout pulse pair applied before acquisition, e.g. `YI`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
pub struct Readout(pub Rotation, pub Rotation);

impl Readout {
    pub const II: Readout = Readout(Rotation::I, Rotation::I);
    pub const IX: Readout = Readout(Rotation::I, Rotation::X);
    pub const IY: Readout = Readout(Rotation::I, Rotation::Y);
    pub const XI: Readout = Readout(Rotation::X, Rotation::I);
    pub const YI: Readout = Readout(Rotation::Y, Rotation::I);
    pub const YY: Readout = Readout(Rotation::Y, Rotation::Y);

    /// The four pulse pairs whose peaks determine all fifteen Pauli expectations.
    pub const TOMOGRAPHY_SET: [Readout; 4] = [Readout::IY, Readout::YI, Readout::XI, Readout::IX];

    pub fn unitary(&self) -> CMat4 {
        kron2(&self.0.matrix(), &self.1.matrix())
    }

    pub fn parse(s: &str) -> Result<Self> {
        let r = |ch: char| match ch {
            'I' => Ok(Rotation::I),
            'X' => Ok(Rotation::X),
            'Y' => Ok(Rotation::Y),
            _ => domain(format!("unknown readout pulse '{ch}'")),
        };
        let chars: Vec<char> = s.trim().chars().collect();
        if chars.len() != 2 {
            return domain(format!("readout label must have two letters, got '{s}'"));
        }
        Ok(Readout(r(chars[0])?, r(chars[1])?))
    }
}

impl fmt::Display for Readout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = |r: Rotation| match r {
            Rotation::I => 'I',
            Rotation::X => 'X',
            Rotation::Y => 'Y',
        };
        write!(f, "{}{}", l(self.0), l(self.1))
    }
}

/// Acquisition grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidGrid {
    pub dt: f64,
    pub len: usize,
}

impl Default for FidGrid {
    fn default() -> Self {
        FidGrid { dt: 2e-5, len: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidRecord {
    pub readout: Readout,
    pub times: Vec<f64>,
    pub signal: Vec<C64>,
}

impl FidRecord {
    pub fn scaled(&self, factor: f64) -> FidRecord {
        FidRecord {
            readout: self.readout,
            times: self.times.clone(),
            signal: self.signal.iter().map(|z| z * factor).collect(),
        }
    }
}

/// Receiver observable `sum_k (sigma_x^k - i sigma_y^k)`.
fn receiver() -> CMat4 {
    let lower = Pauli::X.matrix() - Pauli::Y.matrix() * c(0.0, 1.0);
    let id = Pauli::Id.matrix();
    kron2(&lower, &id) + kron2(&id, &lower)
}

/// Free precession of `U rho U^dagger` under `h_int`, observed with the receiver.
pub fn simulate_fid(rho: &DensityMatrix, readout: Readout, spin: &SpinSystem, grid: &FidGrid) -> FidRecord {
    let rotated = rho.evolve(&readout.unitary()).into_matrix();
    let e = spin.energies();
    let o = receiver();
    // Only the elements coupled by the receiver contribute.
    let mut terms = Vec::new();
    for a in 0..4 {
        for b in 0..4 {
            let w = o[(b, a)];
            if w.norm() > 0.0 && rotated[(a, b)].norm() > 0.0 {
                terms.push((rotated[(a, b)] * w, e[a] - e[b]));
            }
        }
    }
    let times: Vec<f64> = (0..grid.len).map(|k| k as f64 * grid.dt).collect();
    let signal = times
        .iter()
        .map(|&t| terms.iter().map(|(amp, w)| amp * C64::from_polar(1.0, -w * t)).sum())
        .collect();
    FidRecord { readout, times, signal }
}

/// Complex peak amplitudes `S_kp` of one readout, `S(t) = sum S_kp exp(-i nu_kp t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakSet {
    pub readout: Readout,
    pub amplitudes: [[C64; 2]; 2],
}

/// Least-squares projection of the FID onto the four known peak frequencies.
pub fn extract_peaks(fid: &FidRecord, spin: &SpinSystem) -> Result<PeakSet> {
    let nu = spin.peak_frequencies();
    let flat = [nu[0][0], nu[0][1], nu[1][0], nu[1][1]];
    let n = fid.times.len();
    if n < 4 {
        return domain("FID too short for four peaks");
    }
    let mut min_sep = f64::INFINITY;
    for i in 0..4 {
        for j in (i + 1)..4 {
            min_sep = min_sep.min((flat[i] - flat[j]).abs());
        }
    }
    let window = fid.times[n - 1] - fid.times[0];
    if !(min_sep > 0.0) || window * min_sep / (2.0 * std::f64::consts::PI) < 10.0 {
        return Err(Error::IllConditioned(format!(
            "acquisition window {window:.3e} s resolves fewer than 10 periods of the closest peak separation {:.3e} Hz",
            min_sep / (2.0 * std::f64::consts::PI)
        )));
    }
    let a = DMatrix::from_fn(n, 4, |r, col| C64::from_polar(1.0, -flat[col] * fid.times[r]));
    let gram = a.adjoint() * &a;
    let sv = gram.clone().singular_values();
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || cond > 1e8 {
        return Err(Error::IllConditioned(format!("peak basis condition number {cond:.3e}")));
    }
    let rhs = a.adjoint() * DVector::from_column_slice(&fid.signal);
    let sol = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned("singular peak basis".into()))?;
    Ok(PeakSet {
        readout: fid.readout,
        amplitudes: [[sol[0], sol[1]], [sol[2], sol[3]]],
    })
}

/// Receiver gain relating recorded peak amplitudes to the unit-gain model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub eta: f64,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration { eta: 1.0 }
    }
}

/// Unit-gain peak amplitudes a state would produce under a readout.
pub fn model_peaks(rho: &CMat4, readout: Readout) -> [[C64; 2]; 2] {
    let r = readout.unitary() * rho * readout.unitary().adjoint();
    // S_1p from <0p| r |1p>, S_2p from <p0| r |p1>; receiver weight 2.
    let two = c(2.0, 0.0);
    [
        [r[(0, 2)] * two, r[(1, 3)] * two],
        [r[(0, 1)] * two, r[(2, 3)] * two],
    ]
}

impl Calibration {
    /// Fits the gain from peaks recorded on a known reference state.
    pub fn from_reference(peaks: &[PeakSet], reference: &DensityMatrix) -> Result<Self> {
        let mut num = 0.0;
        let mut den = 0.0;
        for p in peaks {
            let m = model_peaks(reference.matrix(), p.readout);
            for k in 0..2 {
                for q in 0..2 {
                    num += (m[k][q].conj() * p.amplitudes[k][q]).re;
                    den += m[k][q].norm_sqr();
                }
            }
        }
        if !(den > 0.0) {
            return Err(Error::Reconstruction("reference state produces no signal under these readouts".into()));
        }
        let eta = num / den;
        if !(eta > 0.0) {
            return Err(Error::Reconstruction(format!("non-positive receiver gain {eta:.3e}")));
        }
        Ok(Calibration { eta })
    }
}

/// The fifteen non-trivial two-qubit Pauli labels in a fixed order.
pub fn pauli_labels() -> Vec<(Pauli, Pauli)> {
    let mut v = Vec::new();
    for a in Pauli::ALL {
        for b in Pauli::ALL {
            if (a, b) != (Pauli::Id, Pauli::Id) {
                v.push((a, b));
            }
        }
    }
    v
}

/// Reconstructed state and fit diagnostics.
#[derive(Debug, Clone)]
pub struct Tomography {
    pub rho: DensityMatrix,
    /// `<P_a (x) P_b>` indexed by `[a][b]` in `I, X, Y, Z` order.
    pub expectations: [[f64; 4]; 4],
    /// Relative least-squares residual of the peak data.
    pub residual: f64,
}

/// Reconstructs the two-qubit state from peak sets of several readouts.
///
/// Each readout contributes eight real equations linear in the Pauli
/// expectations; the identity component is fixed by the unit trace.
pub fn reconstruct_density_matrix(peaks: &[PeakSet], calib: &Calibration, consistency_tol: f64) -> Result<Tomography> {
    if !(calib.eta > 0.0) {
        return Err(Error::Reconstruction("receiver gain must be positive".into()));
    }
    let labels = pauli_labels();
    let rows = peaks.len() * 8;
    let mut a = DMatrix::<f64>::zeros(rows, labels.len());
    let mut b = DVector::<f64>::zeros(rows);
    for (r, p) in peaks.iter().enumerate() {
        for (col, &(pa, pb)) in labels.iter().enumerate() {
            let m = model_peaks(&(pauli2(pa, pb) * c(0.25, 0.0)), p.readout);
            for k in 0..2 {
                for q in 0..2 {
                    let row = r * 8 + (k * 2 + q) * 2;
                    a[(row, col)] = m[k][q].re;
                    a[(row + 1, col)] = m[k][q].im;
                }
            }
        }
        for k in 0..2 {
            for q in 0..2 {
                let row = r * 8 + (k * 2 + q) * 2;
                b[row] = p.amplitudes[k][q].re / calib.eta;
                b[row + 1] = p.amplitudes[k][q].im / calib.eta;
            }
        }
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let v_t = svd.v_t.as_ref().expect("requested V");
    let mut missing = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s <= 1e-9 * smax {
            let row = v_t.row(i);
            let (best, _) = row.iter().enumerate().fold((0, 0.0), |acc, (j, x)| if x.abs() > acc.1 { (j, x.abs()) } else { acc });
            let (pa, pb) = labels[best];
            missing.push(format!("{}{}", pa.symbol(), pb.symbol()));
        }
    }
    if !missing.is_empty() {
        return Err(Error::Reconstruction(format!(
            "readout set does not determine Pauli expectation(s): {}",
            missing.join(", ")
        )));
    }
    let x = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Reconstruction(e.to_string()))?;
    let resid = (&a * &x - &b).norm();
    let scale = b.norm().max(f64::MIN_POSITIVE);
    let residual = resid / scale;
    if residual > consistency_tol {
        return Err(Error::Reconstruction(format!(
            "peak data inconsistent with any density matrix: relative residual {residual:.3e}"
        )));
    }
    let mut expectations = [[0.0; 4]; 4];
    expectations[0][0] = 1.0;
    let mut m = CMat4::identity() * c(0.25, 0.0);
    for (col, &(pa, pb)) in labels.iter().enumerate() {
        expectations[pa as usize][pb as usize] = x[col];
        m += pauli2(pa, pb) * c(x[col] / 4.0, 0.0);
    }
    debug_assert!(linalg::hermiticity_error(&m) < 1e-12);
    Ok(Tomography {
        rho: DensityMatrix::from_unchecked(m),
        expectations,
        residual,
    })
}

/// Simulates the readouts, extracts peaks and reconstructs the state.
pub fn tomography_round_trip(rho: &DensityMatrix, spin: &SpinSystem, grid: &FidGrid, readouts: &[Readout]) -> Result<Tomography> {
    let peaks = readouts
        .iter()
        .map(|&r| extract_peaks(&simulate_fid(rho, r, spin, grid), spin))
        .collect::<Result<Vec<_>>>()?;
    reconstruct_density_matrix(&peaks, &Calibration::default(), 1e-6)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h_int_is_diagonal_with_expected_levels() {
        let s = SpinSystem::default();
        let e = s.energies();
        let pj = std::f64::consts::PI * s.j_coupling_hz;
        // |01> -> |11> transition (spin 1 flip, spin 2 down) sits at w1 - pi J
        assert!(((e[1] - e[3]) - (s.offsets[0] - pj)).abs() < 1e-9);
        assert!(((e[0] - e[1]) - (s.offsets[1] + pj)).abs() < 1e-9);
    }

    #[test]
    fn pseudo_pure_domain() {
        let mut s = SpinSystem::default();
        assert!(prepare_pseudo_pure(&s).is_ok());
        s.pseudo_pure_delta = 0.0;
        assert!(prepare_pseudo_pure(&s).is_err());
        s.pseudo_pure_delta = 1.5;
        assert!(prepare_pseudo_pure(&s).is_err());
    }

    #[test]
    fn y_readout_rotates_z_into_x() {
        let u = Readout::YI.unitary();
        let z = pauli2(Pauli::Z, Pauli::Id);
        let rotated = u * z * u.adjoint();
        assert!(linalg::max_abs_diff(&rotated, &pauli2(Pauli::X, Pauli::Id)) < 1e-14);
    }

    #[test]
    fn standard_ii_ix_iy_yy_set_misses_yy() {
        let rho = DensityMatrix::site(0).unwrap();
        let s = SpinSystem::default();
        let set = [Readout::II, Readout::IY, Readout::YI, Readout::YY];
        let err = tomography_round_trip(&rho, &s, &FidGrid::default(), &set).unwrap_err();
        assert!(err.to_string().contains("YY"), "{err}");
    }

    #[test]
    fn collided_peaks_are_ill_conditioned() {
        let mut s = SpinSystem::default();
        s.offsets = [hz(2000.0), hz(2000.0)];
        let fid = simulate_fid(&DensityMatrix::site(0).unwrap(), Readout::YI, &s, &FidGrid::default());
        assert!(matches!(extract_peaks(&fid, &s), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn readout_labels_round_trip() {
        for r in Readout::TOMOGRAPHY_SET {
            assert_eq!(Readout::parse(&r.to_string()).unwrap(), r);
        }
        assert!(Readout::parse("ZZ").is_err());
    }
}

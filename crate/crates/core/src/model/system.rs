use serde::{Deserialize, Serialize};

use super::units::{self, Frame, FrameMap};
use crate::error::{domain, Result};
use crate::linalg::RMat4;

/// Element-wise relative tolerance for comparing a built Hamiltonian against
/// reference matrices given to four significant figures.
pub const MATRIX_REL_TOL: f64 = 5e-3;

/// Point-dipole coupling between two sites in rad/s (EET frame).
///
/// `r` is the separation vector in metres, `mu_i` and `mu_j` are transition
/// dipoles in C m.
pub fn dipole_coupling(r: [f64; 3], mu_i: [f64; 3], mu_j: [f64; 3]) -> Result<f64> {
    let dist = norm(r);
    if !(dist > 0.0) || !dist.is_finite() {
        return domain("coincident dipoles: zero separation");
    }
    let rhat = r.map(|x| x / dist);
    let orient = dot(mu_i, mu_j) - 3.0 * dot(mu_i, rhat) * dot(mu_j, rhat);
    Ok(orient / (4.0 * std::f64::consts::PI * units::VACUUM_PERMITTIVITY * dist.powi(3) * units::HBAR))
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// Geometry of the collinear tetramer: sites at x = 0, r, R - r, R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TetramerGeometry {
    pub r_angstrom: f64,
    pub chain_angstrom: f64,
    pub dipole_debye: f64,
    /// Common dipole direction; need not be normalised.
    pub orientation: [f64; 3],
    pub site_energies_cm: [f64; 4],
}

impl Default for TetramerGeometry {
    fn default() -> Self {
        TetramerGeometry {
            r_angstrom: 11.3,
            chain_angstrom: 40.0,
            dipole_debye: 7.75,
            orientation: [0.0, 0.0, 1.0],
            site_energies_cm: [13000.0, 12900.0, 12300.0, 12200.0],
        }
    }
}

impl TetramerGeometry {
    pub fn with_r(mut self, r_angstrom: f64) -> Self {
        self.r_angstrom = r_angstrom;
        self
    }
}

/// Four chromophores with site energies, positions and transition dipoles.
///
/// Stored in the EET frame (SI positions, rad/s energies); the NMR-frame
/// Hamiltonian is obtained by dividing by the frame scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcitonSystem {
    pub site_energies: [f64; 4],
    pub positions: [[f64; 3]; 4],
    pub dipoles: [[f64; 3]; 4],
    pub frame_map: FrameMap,
}

impl ExcitonSystem {
    pub fn new(
        site_energies: [f64; 4],
        positions: [[f64; 3]; 4],
        dipoles: [[f64; 3]; 4],
        frame_map: FrameMap,
    ) -> Result<Self> {
        if site_energies.iter().any(|e| !e.is_finite()) {
            return domain("site energies must be finite");
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let d = [0, 1, 2].map(|k| positions[j][k] - positions[i][k]);
                if !(norm(d) > 0.0) {
                    return domain(format!("sites {} and {} coincide", i + 1, j + 1));
                }
            }
        }
        Ok(ExcitonSystem {
            site_energies,
            positions,
            dipoles,
            frame_map,
        })
    }

    pub fn tetramer(geom: &TetramerGeometry, frame_map: FrameMap) -> Result<Self> {
        let r = geom.r_angstrom;
        let big = geom.chain_angstrom;
        if !(r > 0.0 && 2.0 * r < big) {
            return domain(format!(
                "site positions must be strictly increasing: need 0 < 2r < R, got r = {r} A, R = {big} A"
            ));
        }
        let on = norm(geom.orientation);
        if !(on > 0.0) {
            return domain("dipole orientation must be non-zero");
        }
        let mu = geom.dipole_debye * units::DEBYE;
        let dip = geom.orientation.map(|x| x / on * mu);
        let xs = [0.0, r, big - r, big];
        let positions = xs.map(|x| [x * units::ANGSTROM, 0.0, 0.0]);
        let energies = geom.site_energies_cm.map(units::wavenumber_to_angular);
        Self::new(energies, positions, [dip; 4], frame_map)
    }

    pub fn coupling(&self, i: usize, j: usize) -> Result<f64> {
        let r = [0, 1, 2].map(|k| self.positions[j][k] - self.positions[i][k]);
        dipole_coupling(r, self.dipoles[i], self.dipoles[j])
    }

    /// Site-basis Hamiltonian in rad/s in the requested frame.
    pub fn hamiltonian(&self, frame: Frame) -> RMat4 {
        let f = self.frame_map.frequency(1.0, Frame::Eet, frame);
        let mut h = RMat4::zeros();
        for i in 0..4 {
            h[(i, i)] = self.site_energies[i] * f;
            for j in (i + 1)..4 {
                // Positions were validated as distinct at construction.
                let jij = self.coupling(i, j).expect("distinct sites") * f;
                h[(i, j)] = jij;
                h[(j, i)] = jij;
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::units::to_hz;

    #[test]
    fn perpendicular_dipoles_give_textbook_coupling() {
        let mu = units::DEBYE;
        let r = 10.0 * units::ANGSTROM;
        let j = dipole_coupling([r, 0.0, 0.0], [0.0, 0.0, mu], [0.0, 0.0, mu]).unwrap();
        let expected = mu * mu / (4.0 * std::f64::consts::PI * units::VACUUM_PERMITTIVITY * r.powi(3)) / units::HBAR;
        assert!((j - expected).abs() / expected < 1e-14);
        // 1 D^2 at 10 A is about 5.03 cm^-1
        assert!((units::angular_to_wavenumber(j) - 5.034).abs() < 1e-3);
    }

    #[test]
    fn collinear_dipoles_have_doubled_negative_coupling() {
        let mu = units::DEBYE;
        let r = 10.0 * units::ANGSTROM;
        let perp = dipole_coupling([r, 0.0, 0.0], [0.0, mu, 0.0], [0.0, mu, 0.0]).unwrap();
        let col = dipole_coupling([r, 0.0, 0.0], [mu, 0.0, 0.0], [mu, 0.0, 0.0]).unwrap();
        assert!((col + 2.0 * perp).abs() / perp < 1e-14);
    }

    #[test]
    fn coincident_sites_are_rejected() {
        assert!(dipole_coupling([0.0; 3], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).is_err());
        let g = TetramerGeometry::default().with_r(20.0);
        assert!(ExcitonSystem::tetramer(&g, FrameMap::default()).is_err());
    }

    #[test]
    fn nmr_diagonal_in_khz() {
        let sys = ExcitonSystem::tetramer(&TetramerGeometry::default(), FrameMap::default()).unwrap();
        let h = sys.hamiltonian(Frame::Nmr);
        assert!((to_hz(h[(0, 0)]) / 1e3 - 129.91).abs() < 0.01);
        assert!((to_hz(h[(3, 3)]) / 1e3 - 121.92).abs() < 0.01);
        assert_eq!(h, h.transpose());
    }
}

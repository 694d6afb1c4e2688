//! Scenario files: one TOML document describing model, bath, noise, solver
//! settings, time window and initial state.
//!
//! Bath rates, the temperature, the noise comb spacing and all times are read
//! in the frame named by the top-level `frame` key and converted to the NMR
//! frame before anything runs. Site energies are always in cm^-1 (EET frame).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bathnoise::ChannelLayout;
use crate::dynamics::{Backend, NoiseSettings, OpenSystem};
use crate::error::{Error, Result};
use crate::grape::GrapeOptions;
use crate::grid::TimeGrid;
use crate::heom::DepthSearch;
use crate::linalg::RMat4;
use crate::model::units::{self, Frame, FrameMap};
use crate::model::{DensityMatrix, ExcitonSystem, SpectralDensity, TetramerGeometry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub frame: Frame,
    pub model: ModelConfig,
    pub bath: BathConfig,
    pub time: TimeConfig,
    pub initial_state: InitialState,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub heom: HeomConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub grape: GrapeConfig,
    #[serde(default)]
    pub scan: ScanConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Intra-dimer distance (angstrom).
    pub r_angstrom: f64,
    #[serde(default = "default_chain")]
    pub chain_angstrom: f64,
    #[serde(default = "default_dipole")]
    pub dipole_debye: f64,
    #[serde(default = "default_orientation")]
    pub orientation: [f64; 3],
    #[serde(default = "default_energies")]
    pub site_energies_cm: [f64; 4],
    /// EET-to-NMR frequency scale factor.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_chain() -> f64 {
    TetramerGeometry::default().chain_angstrom
}
fn default_dipole() -> f64 {
    TetramerGeometry::default().dipole_debye
}
fn default_orientation() -> [f64; 3] {
    TetramerGeometry::default().orientation
}
fn default_energies() -> [f64; 4] {
    TetramerGeometry::default().site_energies_cm
}
fn default_scale() -> f64 {
    units::DEFAULT_SCALE_FACTOR
}

/// Bath description; frequencies in Hz (multiplied by 2 pi on load).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BathConfig {
    DrudeLorentz {
        lambda_hz: f64,
        gamma_hz: f64,
        temperature_k: f64,
    },
    PowerLaw {
        lambda: f64,
        s: f64,
        cutoff_hz: f64,
        temperature_k: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default = "default_base_hz")]
    pub base_frequency_hz: f64,
    #[serde(default)]
    pub cutoff_index: Option<usize>,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default)]
    pub channels: ChannelLayout,
    #[serde(default)]
    pub slice_dt_s: Option<f64>,
}

fn default_base_hz() -> f64 {
    0.1
}
fn one() -> f64 {
    1.0
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            base_frequency_hz: default_base_hz(),
            cutoff_index: None,
            amplitude: 1.0,
            channels: ChannelLayout::FourSite,
            slice_dt_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_end_s: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    /// Initially excited site, 1-based.
    pub site: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeomConfig {
    /// Fixed depth; when absent the depth is searched from `start` to `cap`.
    #[serde(default)]
    pub depth: Option<usize>,
    #[serde(default = "default_start")]
    pub start: usize,
    #[serde(default = "default_cap")]
    pub cap: usize,
    #[serde(default = "default_depth_tol")]
    pub tolerance: f64,
    #[serde(default)]
    pub halving_check: bool,
}

fn default_start() -> usize {
    DepthSearch::default().start
}
fn default_cap() -> usize {
    DepthSearch::default().cap
}
fn default_depth_tol() -> f64 {
    DepthSearch::default().tolerance
}

impl Default for HeomConfig {
    fn default() -> Self {
        HeomConfig {
            depth: None,
            start: default_start(),
            cap: default_cap(),
            tolerance: default_depth_tol(),
            halving_check: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
    /// Ensemble sizes for convergence studies.
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
}

fn default_realizations() -> usize {
    500
}
fn one_u64() -> u64 {
    1
}
fn default_sizes() -> Vec<usize> {
    vec![50, 100, 200, 500]
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            realizations: default_realizations(),
            seed: 1,
            sizes: default_sizes(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrapeConfig {
    #[serde(default = "default_slices")]
    pub slices: usize,
    /// Control duration per compiled segment (lab time, s); default 4/J.
    #[serde(default)]
    pub duration_s: Option<f64>,
    #[serde(default = "default_max_iter")]
    pub max_iterations: usize,
    #[serde(default = "default_target_f")]
    pub target_fidelity: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    /// Output intervals per compiled segment.
    #[serde(default = "default_segment")]
    pub segment_points: usize,
    /// Noise realizations that are compiled and replayed.
    #[serde(default = "default_grape_real")]
    pub realizations: usize,
}

fn default_slices() -> usize {
    GrapeOptions::default().slices
}
fn default_max_iter() -> usize {
    GrapeOptions::default().max_iterations
}
fn default_target_f() -> f64 {
    GrapeOptions::default().target_fidelity
}
fn default_restarts() -> usize {
    GrapeOptions::default().restarts
}
fn default_segment() -> usize {
    10
}
fn default_grape_real() -> usize {
    4
}

impl Default for GrapeConfig {
    fn default() -> Self {
        GrapeConfig {
            slices: default_slices(),
            duration_s: None,
            max_iterations: default_max_iter(),
            target_fidelity: default_target_f(),
            restarts: default_restarts(),
            seed: 0,
            segment_points: default_segment(),
            realizations: default_grape_real(),
        }
    }
}

impl GrapeConfig {
    pub fn options(&self) -> GrapeOptions {
        GrapeOptions {
            slices: self.slices,
            duration: self.duration_s,
            max_iterations: self.max_iterations,
            target_fidelity: self.target_fidelity,
            restarts: self.restarts,
            seed: self.seed,
            ..GrapeOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    /// Bath relaxation rates for `scan-gamma` (Hz, scenario frame).
    #[serde(default)]
    pub gamma_hz: Vec<f64>,
    /// Intra-dimer distances for `scan-geometry` (angstrom).
    #[serde(default)]
    pub r_angstrom: Vec<f64>,
    /// Population-balance tolerance for transfer times.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Solver used by scans.
    #[serde(default)]
    pub backend: ScanBackend,
}

fn default_tau() -> f64 {
    crate::analysis::DEFAULT_TAU
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig {
            gamma_hz: Vec::new(),
            r_angstrom: Vec::new(),
            tau: default_tau(),
            backend: ScanBackend::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScanBackend {
    #[default]
    Heom,
    Ensemble,
}

fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.message().trim().to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return config("name must not be empty");
        }
        if self.time.points < 2 {
            return config("time.points must be at least 2");
        }
        if !(self.time.t_end_s.is_finite() && self.time.t_end_s > 0.0) {
            return config(format!("time.t_end_s must be positive, got {}", self.time.t_end_s));
        }
        if !(1..=4).contains(&self.initial_state.site) {
            return config(format!("initial_state.site must be 1..4, got {}", self.initial_state.site));
        }
        if self.heom.depth == Some(0) {
            return config("heom.depth must be >= 1");
        }
        if self.heom.depth.is_none() && !(self.heom.start >= 1 && self.heom.start < self.heom.cap) {
            return config("heom.start must satisfy 1 <= start < cap");
        }
        if self.ensemble.realizations == 0 || self.ensemble.sizes.contains(&0) {
            return config("ensemble sizes must be positive");
        }
        if !(self.scan.tau > 0.0) {
            return config("scan.tau must be positive");
        }
        if self.grape.segment_points == 0 || self.grape.realizations == 0 {
            return config("grape.segment_points and grape.realizations must be positive");
        }
        self.system().map_err(as_config)?;
        for &g in &self.scan.gamma_hz {
            self.with_gamma_hz(g)?.system().map_err(as_config)?;
        }
        for &r in &self.scan.r_angstrom {
            self.with_r(r).system().map_err(as_config)?;
        }
        Ok(())
    }

    pub fn frame_map(&self) -> Result<FrameMap> {
        FrameMap::new(self.model.scale)
    }

    fn to_nmr_frequency(&self, w: f64) -> Result<f64> {
        Ok(self.frame_map()?.frequency(w, self.frame, Frame::Nmr))
    }

    fn to_nmr_time(&self, t: f64) -> Result<f64> {
        Ok(self.frame_map()?.time(t, self.frame, Frame::Nmr))
    }

    pub fn geometry(&self) -> TetramerGeometry {
        TetramerGeometry {
            r_angstrom: self.model.r_angstrom,
            chain_angstrom: self.model.chain_angstrom,
            dipole_debye: self.model.dipole_debye,
            orientation: self.model.orientation,
            site_energies_cm: self.model.site_energies_cm,
        }
    }

    /// NMR-frame system Hamiltonian.
    pub fn hamiltonian(&self) -> Result<RMat4> {
        let sys = ExcitonSystem::tetramer(&self.geometry(), self.frame_map()?)?;
        Ok(sys.hamiltonian(Frame::Nmr))
    }

    /// NMR-frame spectral density and temperature.
    pub fn bath(&self) -> Result<(SpectralDensity, f64)> {
        let fm = self.frame_map()?;
        match self.bath {
            BathConfig::DrudeLorentz {
                lambda_hz,
                gamma_hz,
                temperature_k,
            } => Ok((
                SpectralDensity::drude_lorentz(
                    self.to_nmr_frequency(units::hz(lambda_hz))?,
                    self.to_nmr_frequency(units::hz(gamma_hz))?,
                )?,
                fm.temperature(temperature_k, self.frame, Frame::Nmr),
            )),
            BathConfig::PowerLaw {
                lambda,
                s,
                cutoff_hz,
                temperature_k,
            } => Ok((
                SpectralDensity::power_law(lambda, s, self.to_nmr_frequency(units::hz(cutoff_hz))?)?,
                fm.temperature(temperature_k, self.frame, Frame::Nmr),
            )),
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::spanning(self.to_nmr_time(self.time.t_end_s)?, self.time.points)
    }

    pub fn noise_settings(&self) -> Result<NoiseSettings> {
        Ok(NoiseSettings {
            base_frequency: self.to_nmr_frequency(units::hz(self.noise.base_frequency_hz))?,
            cutoff_index: self.noise.cutoff_index,
            amplitude: self.noise.amplitude,
            channels: self.noise.channels,
            slice_dt: match self.noise.slice_dt_s {
                Some(t) => Some(self.to_nmr_time(t)?),
                None => None,
            },
        })
    }

    /// The resolved problem in the NMR frame.
    pub fn system(&self) -> Result<OpenSystem> {
        let (bath, temperature_k) = self.bath()?;
        let problem = OpenSystem {
            h: self.hamiltonian()?,
            bath,
            temperature_k,
            rho0: DensityMatrix::site(self.initial_state.site - 1)?,
            grid: self.grid()?,
            noise: self.noise_settings()?,
        };
        problem.recipe()?;
        Ok(problem)
    }

    pub fn heom_backend(&self) -> Backend {
        Backend::Heom {
            depth: self.heom.depth,
            search: DepthSearch {
                start: self.heom.start,
                cap: self.heom.cap,
                tolerance: self.heom.tolerance,
                halving_check: self.heom.halving_check,
            },
        }
    }

    pub fn ensemble_backend(&self) -> Backend {
        Backend::Ensemble {
            realizations: self.ensemble.realizations,
            seed: self.ensemble.seed,
        }
    }

    pub fn scan_backend(&self) -> Backend {
        match self.scan.backend {
            ScanBackend::Heom => self.heom_backend(),
            ScanBackend::Ensemble => self.ensemble_backend(),
        }
    }

    pub fn with_r(&self, r: f64) -> Scenario {
        let mut s = self.clone();
        s.model.r_angstrom = r;
        s
    }

    pub fn with_gamma_hz(&self, g: f64) -> Result<Scenario> {
        let mut s = self.clone();
        match &mut s.bath {
            BathConfig::DrudeLorentz { gamma_hz, .. } => *gamma_hz = g,
            BathConfig::PowerLaw { .. } => return config("scan.gamma_hz requires a drude-lorentz bath"),
        }
        Ok(s)
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "t"
frame = "nmr"
[model]
r_angstrom = 11.3
[bath]
kind = "drude-lorentz"
lambda_hz = 2.0
gamma_hz = 50.0
temperature_k = 1e-3
[time]
t_end_s = 0.01
points = 11
[initial_state]
site = 1
"#;

    #[test]
    fn minimal_parses() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        let p = s.system().unwrap();
        assert_eq!(p.grid.len, 11);
        assert!((p.bath.peak_frequency() - units::hz(50.0)).abs() < 1e-9);
    }

    #[test]
    fn empty_names_first_missing_key() {
        let e = Scenario::from_toml("").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("name"), "{e}");
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("gamma_hz", "gama_hz");
        let e = Scenario::from_toml(&bad).unwrap_err();
        assert!(e.to_string().contains("gama_hz"), "{e}");
        let bad = MINIMAL.replace("[initial_state]", "[initial_state]\nphase = 1");
        assert!(Scenario::from_toml(&bad).is_err());
    }

    #[test]
    fn eet_frame_matches_nmr_frame() {
        let eet = MINIMAL
            .replace("frame = \"nmr\"", "frame = \"eet\"")
            .replace("lambda_hz = 2.0", "lambda_hz = 6e9")
            .replace("gamma_hz = 50.0", "gamma_hz = 1.5e11")
            .replace("temperature_k = 1e-3", "temperature_k = 3e6")
            .replace("t_end_s = 0.01", "t_end_s = 3.3333333333333335e-12");
        let a = Scenario::from_toml(MINIMAL).unwrap().system().unwrap();
        let b = Scenario::from_toml(&eet).unwrap().system().unwrap();
        assert!((a.bath.peak_frequency() / b.bath.peak_frequency() - 1.0).abs() < 1e-12);
        assert!((a.temperature_k / b.temperature_k - 1.0).abs() < 1e-12);
        assert!((a.grid.dt / b.grid.dt - 1.0).abs() < 1e-12);
    }

    #[test]
    fn round_trips_through_toml() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
    }
}

//! One open-system problem, solvable by either backend.

use serde::{Deserialize, Serialize};

use crate::bathnoise::{ChannelLayout, NoiseRecipe};
use crate::ensemble::{self, EnsembleProblem};
use crate::error::{domain, Result};
use crate::exec::ExecPolicy;
use crate::grid::TimeGrid;
use crate::heom::{self, DepthSearch, HeomBath};
use crate::linalg::RMat4;
use crate::model::{DensityMatrix, SpectralDensity};

/// Noise-synthesis settings for the ensemble backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSettings {
    pub base_frequency: f64,
    pub cutoff_index: Option<usize>,
    pub amplitude: f64,
    pub channels: ChannelLayout,
    pub slice_dt: Option<f64>,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        NoiseSettings {
            base_frequency: crate::bathnoise::default_base_frequency(),
            cutoff_index: None,
            amplitude: 1.0,
            channels: ChannelLayout::FourSite,
            slice_dt: None,
        }
    }
}

/// Everything defining an open-system run, all in one frame (normally NMR).
#[derive(Debug, Clone)]
pub struct OpenSystem {
    pub h: RMat4,
    pub bath: SpectralDensity,
    pub temperature_k: f64,
    pub rho0: DensityMatrix,
    pub grid: TimeGrid,
    pub noise: NoiseSettings,
}

impl OpenSystem {
    pub fn recipe(&self) -> Result<NoiseRecipe> {
        NoiseRecipe::new(
            self.bath,
            self.temperature_k,
            self.noise.base_frequency,
            self.noise.cutoff_index,
            self.noise.amplitude,
            self.noise.channels,
        )
    }

    pub fn heom_bath(&self) -> Result<HeomBath> {
        match self.bath {
            SpectralDensity::DrudeLorentz { lambda, gamma } => HeomBath::uniform(lambda, gamma, self.temperature_k),
            SpectralDensity::PowerLaw { .. } => domain("the hierarchy backend requires a Drude-Lorentz bath"),
        }
    }

    pub fn ensemble_problem(&self) -> Result<EnsembleProblem> {
        Ok(EnsembleProblem {
            h_sys: self.h,
            recipe: self.recipe()?,
            rho0: self.rho0,
            grid: self.grid,
            slice_dt: self.noise.slice_dt,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backend {
    /// Hierarchy with a fixed depth, or the automatic depth search.
    Heom { depth: Option<usize>, search: DepthSearch },
    Ensemble { realizations: usize, seed: u64 },
}

/// Diagnostics attached to a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunDiagnostics {
    pub backend: String,
    pub depth: Option<usize>,
    pub depth_metric: Option<f64>,
    pub converged: Option<bool>,
    pub step: f64,
    pub realizations: Option<usize>,
    pub seed: Option<u64>,
    pub warnings: Vec<String>,
    pub runtime_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Per-element standard errors (ensemble only).
    pub std_error: Option<Vec<crate::linalg::CMat4>>,
    pub diagnostics: RunDiagnostics,
}

impl RunOutput {
    pub fn populations(&self) -> Vec<[f64; 4]> {
        self.states.iter().map(|s| s.populations()).collect()
    }
}

pub fn simulate(problem: &OpenSystem, backend: &Backend, policy: ExecPolicy) -> Result<RunOutput> {
    let t0 = std::time::Instant::now();
    match *backend {
        Backend::Heom { depth: Some(d), .. } => {
            let bath = problem.heom_bath()?;
            let tr = heom::propagate(&problem.h, &bath, &problem.rho0, &problem.grid, d, 1.0, policy)?;
            Ok(RunOutput {
                times: tr.times,
                states: tr.states,
                std_error: None,
                diagnostics: RunDiagnostics {
                    backend: "heom".into(),
                    depth: Some(d),
                    step: tr.step,
                    runtime_s: t0.elapsed().as_secs_f64(),
                    ..Default::default()
                },
            })
        }
        Backend::Heom { depth: None, search } => {
            let bath = problem.heom_bath()?;
            let sol = heom::solve(&problem.h, &bath, &problem.rho0, &problem.grid, &search, policy)?;
            Ok(RunOutput {
                times: sol.trajectory.times,
                states: sol.trajectory.states,
                std_error: None,
                diagnostics: RunDiagnostics {
                    backend: "heom".into(),
                    depth: Some(sol.depth),
                    depth_metric: Some(sol.depth_metric),
                    converged: Some(sol.converged),
                    step: sol.trajectory.step,
                    warnings: sol.warnings,
                    runtime_s: sol.runtime_s,
                    ..Default::default()
                },
            })
        }
        Backend::Ensemble { realizations, seed } => {
            let prob = problem.ensemble_problem()?;
            let res = ensemble::ensemble_average(&prob, realizations, seed, policy)?;
            Ok(RunOutput {
                times: res.times,
                states: res.mean,
                std_error: Some(res.std_error),
                diagnostics: RunDiagnostics {
                    backend: "ensemble".into(),
                    step: res.slicing.dt,
                    realizations: Some(realizations),
                    seed: Some(seed),
                    runtime_s: t0.elapsed().as_secs_f64(),
                    ..Default::default()
                },
            })
        }
    }
}

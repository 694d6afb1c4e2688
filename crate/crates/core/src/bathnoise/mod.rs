//! Classical random-phase noise whose power spectrum reproduces a bath spectral
//! density: `beta(t) = sum_j a_j cos(w_j t + phi_j)` with `w_j = j w0` and
//! `a_j = alpha F(w_j) w_j = sqrt(2 w0 S(w_j) / pi)`.

pub mod chirp;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::exec::{self, ExecPolicy};
use crate::linalg::RMat4;
use crate::model::{units, SpectralDensity};
use chirp::CombEvaluator;

/// Two-sided classical noise spectrum `S(w) = 2 (k_B T / hbar) J(w) / w`.
///
/// With this normalisation the noise variance `(1/pi) int_0^inf S dw` equals
/// `2 lambda k_B T / hbar` for a Drude-Lorentz bath.
pub fn target_psd(sd: &SpectralDensity, thermal_rate: f64, w: f64) -> f64 {
    if w == 0.0 {
        2.0 * thermal_rate * sd.zero_frequency_slope()
    } else {
        2.0 * thermal_rate * sd.eval_unchecked(w.abs()) / w.abs()
    }
}

/// How noise channels map onto the four site energies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ChannelLayout {
    /// One independent channel per site; the site-mean is removed, which only
    /// changes a global phase.
    #[default]
    FourSite,
    /// Two channels driving `Z (x) I` and `I (x) Z`.
    TwoChannel,
}

impl ChannelLayout {
    pub fn n_channels(self) -> usize {
        match self {
            ChannelLayout::FourSite => 4,
            ChannelLayout::TwoChannel => 2,
        }
    }
}

/// Everything needed to draw noise trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRecipe {
    pub target: SpectralDensity,
    /// k_B T / hbar in rad/s.
    pub thermal_rate: f64,
    /// Comb spacing w0 (rad/s).
    pub base_frequency: f64,
    /// Number of comb lines N_c.
    pub cutoff_index: usize,
    /// Modulation amplitude alpha_z; zero switches the noise off.
    pub amplitude: f64,
    pub channels: ChannelLayout,
}

/// Default comb spacing, 2 pi x 0.1 Hz.
pub fn default_base_frequency() -> f64 {
    units::hz(0.1)
}

impl NoiseRecipe {
    /// Builds a recipe; `cutoff_index = None` picks the smallest `N_c` with
    /// `N_c w0 >= max(10 x cutoff, 5 x peak)`.
    pub fn new(
        target: SpectralDensity,
        temperature_k: f64,
        base_frequency: f64,
        cutoff_index: Option<usize>,
        amplitude: f64,
        channels: ChannelLayout,
    ) -> Result<Self> {
        target.validate()?;
        if !(temperature_k.is_finite() && temperature_k > 0.0) {
            return domain(format!("temperature must be positive, got {temperature_k}"));
        }
        if !(base_frequency.is_finite() && base_frequency > 0.0) {
            return domain(format!("base frequency must be positive, got {base_frequency}"));
        }
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return domain(format!("modulation amplitude must be >= 0, got {amplitude}"));
        }
        let needed = (10.0 * target.cutoff()).max(5.0 * target.peak_frequency());
        let nc = match cutoff_index {
            Some(n) => n,
            // Guard against a ratio that is an integer up to rounding.
            None => (needed / base_frequency * (1.0 - 1e-12)).ceil() as usize,
        };
        if nc < 1 {
            return domain("cutoff index must be >= 1");
        }
        if (nc as f64) * base_frequency < 5.0 * target.peak_frequency() * (1.0 - 1e-12) {
            return domain(format!(
                "comb band {:.4e} rad/s does not reach 5x the spectral peak {:.4e} rad/s",
                nc as f64 * base_frequency,
                target.peak_frequency()
            ));
        }
        Ok(NoiseRecipe {
            target,
            thermal_rate: units::thermal_rate(temperature_k),
            base_frequency,
            cutoff_index: nc,
            amplitude,
            channels,
        })
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (1..=self.cutoff_index).map(|j| j as f64 * self.base_frequency).collect()
    }

    /// Per-line cosine amplitudes `a_j = alpha F(w_j) w_j`.
    pub fn line_amplitudes(&self) -> Vec<f64> {
        let p = self.profile();
        p.frequencies
            .iter()
            .zip(&p.values)
            .map(|(w, f)| self.amplitude * f * w)
            .collect()
    }

    pub fn profile(&self) -> ModulationProfile {
        let freqs = self.frequencies();
        let values = freqs
            .iter()
            .map(|&w| {
                if self.amplitude == 0.0 {
                    0.0
                } else {
                    let s = target_psd(&self.target, self.thermal_rate, w);
                    (2.0 * self.base_frequency * s / std::f64::consts::PI).sqrt() / (self.amplitude * w)
                }
            })
            .collect();
        ModulationProfile {
            frequencies: freqs,
            values,
            amplitude: self.amplitude,
        }
    }

    /// Per-channel variance `sum_j a_j^2 / 2`.
    pub fn variance(&self) -> f64 {
        self.line_amplitudes().iter().map(|a| a * a / 2.0).sum()
    }

    /// Upper bound on `|beta(t)|` for any phases.
    pub fn amplitude_bound(&self) -> f64 {
        self.line_amplitudes().iter().sum()
    }

    /// Correlation function `<beta(t) beta(t + tau)> = sum_j a_j^2 / 2 cos(w_j tau)`.
    pub fn correlation(&self, tau: f64) -> f64 {
        self.line_amplitudes()
            .iter()
            .zip(self.frequencies())
            .map(|(a, w)| a * a / 2.0 * (w * tau).cos())
            .sum()
    }

    /// Gaussian dephasing exponent of one channel: half the variance of the
    /// accumulated phase `int_0^t beta`.
    pub fn dephasing_exponent(&self, t: f64) -> f64 {
        self.line_amplitudes()
            .iter()
            .zip(self.frequencies())
            .map(|(a, w)| a * a * (1.0 - (w * t).cos()) / (2.0 * w * w))
            .sum()
    }

    /// Largest spectral radius of the site-energy noise that is exceeded with
    /// negligible probability: four standard deviations of one site.
    pub fn typical_bound(&self) -> f64 {
        let per_channel = self.variance().sqrt();
        let site = match self.channels {
            ChannelLayout::FourSite => per_channel,
            ChannelLayout::TwoChannel => per_channel * 2f64.sqrt(),
        };
        4.0 * site
    }

    /// Phases of one channel for a given seed; channel `m` uses ChaCha stream `m`.
    pub fn phases(&self, seed: u64, channel: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(channel as u64);
        (0..self.cutoff_index)
            .map(|_| 2.0 * std::f64::consts::PI * rng.random::<f64>())
            .collect()
    }
}

/// The modulation profile `F(w_j)` on the comb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationProfile {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    pub amplitude: f64,
}

/// Uniform sample times `t_k = t0 + k dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub t0: f64,
    pub dt: f64,
    pub len: usize,
}

impl SampleGrid {
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
}

/// Noise values of every channel on a sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrajectory {
    pub seed: u64,
    pub grid: SampleGrid,
    pub layout: ChannelLayout,
    pub channels: Vec<Vec<f64>>,
}

/// Draws trajectories for one recipe on one grid, sharing the FFT plan.
pub struct NoiseSampler {
    recipe: NoiseRecipe,
    grid: SampleGrid,
    amps: Vec<f64>,
    evaluator: CombEvaluator,
}

impl NoiseSampler {
    pub fn new(recipe: &NoiseRecipe, grid: SampleGrid) -> Result<Self> {
        if !(grid.dt.is_finite() && grid.dt > 0.0) || grid.len == 0 {
            return domain("noise sample grid needs dt > 0 and at least one point");
        }
        Ok(NoiseSampler {
            recipe: *recipe,
            grid,
            amps: recipe.line_amplitudes(),
            evaluator: CombEvaluator::new(recipe.cutoff_index, recipe.base_frequency, grid.t0, grid.dt, grid.len),
        })
    }

    pub fn sample(&self, seed: u64) -> NoiseTrajectory {
        let n = self.recipe.channels.n_channels();
        let channels = (0..n)
            .map(|m| {
                if self.recipe.amplitude == 0.0 {
                    vec![0.0; self.grid.len]
                } else {
                    self.evaluator.evaluate(&self.amps, &self.recipe.phases(seed, m))
                }
            })
            .collect();
        NoiseTrajectory {
            seed,
            grid: self.grid,
            layout: self.recipe.channels,
            channels,
        }
    }
}

pub fn sample_trajectory(recipe: &NoiseRecipe, seed: u64, grid: SampleGrid) -> Result<NoiseTrajectory> {
    Ok(NoiseSampler::new(recipe, grid)?.sample(seed))
}

/// Noise Hamiltonian at one sample, decomposed on the two-qubit Z operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseHamiltonian {
    pub zi: f64,
    pub iz: f64,
    pub zz: f64,
}

impl NoiseHamiltonian {
    /// Site-basis diagonal (sites ordered |00>, |01>, |10>, |11>).
    pub fn diagonal(&self) -> [f64; 4] {
        [
            self.zi + self.iz + self.zz,
            self.zi - self.iz - self.zz,
            -self.zi + self.iz - self.zz,
            -self.zi - self.iz + self.zz,
        ]
    }

    pub fn matrix(&self) -> RMat4 {
        RMat4::from_diagonal(&self.diagonal().into())
    }
}

pub fn noise_hamiltonian(traj: &NoiseTrajectory, k: usize) -> NoiseHamiltonian {
    match traj.layout {
        ChannelLayout::FourSite => {
            let d: [f64; 4] = std::array::from_fn(|i| traj.channels[i][k]);
            NoiseHamiltonian {
                zi: (d[0] + d[1] - d[2] - d[3]) / 4.0,
                iz: (d[0] - d[1] + d[2] - d[3]) / 4.0,
                zz: (d[0] - d[1] - d[2] + d[3]) / 4.0,
            }
        }
        ChannelLayout::TwoChannel => NoiseHamiltonian {
            zi: traj.channels[0][k],
            iz: traj.channels[1][k],
            zz: 0.0,
        },
    }
}

/// Averaged-periodogram check of generated noise against the target spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdAudit {
    pub frequencies: Vec<f64>,
    pub empirical: Vec<f64>,
    pub target: Vec<f64>,
    pub relative_l2: f64,
    pub trajectories: usize,
}

/// Welch estimate (Hann windows, 50% overlap, four segments per channel) of
/// the two-sided PSD, averaged over `n_traj` trajectories and all channels,
/// compared with the target on bins inside `[w0, N_c w0]`.
pub fn psd_audit(recipe: &NoiseRecipe, n_traj: usize, master_seed: u64, policy: ExecPolicy) -> Result<PsdAudit> {
    if n_traj == 0 {
        return domain("audit needs at least one trajectory");
    }
    let nc = recipe.cutoff_index;
    let lines_per_bin = (nc / 200).max(1);
    let bin = lines_per_bin as f64 * recipe.base_frequency;
    let t_seg = 2.0 * std::f64::consts::PI / bin;
    let seg_len = ((2.5 * nc as f64 / lines_per_bin as f64).ceil() as usize).next_power_of_two().max(16);
    let dt = t_seg / seg_len as f64;
    let hop = seg_len / 2;
    let n_seg = 4;
    let total = hop * (n_seg - 1) + seg_len;
    let grid = SampleGrid { t0: 0.0, dt, len: total };
    let sampler = NoiseSampler::new(recipe, grid)?;
    let window: Vec<f64> = (0..seg_len)
        .map(|k| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / seg_len as f64).cos())
        .collect();
    let u = window.iter().map(|w| w * w).sum::<f64>() / seg_len as f64;
    let n_bins = ((nc as f64 * recipe.base_frequency / bin).floor() as usize).min(seg_len / 2 - 1);
    let mut planner = rustfft::FftPlanner::new();
    let fft = planner.plan_fft_forward(seg_len);
    let leaf = |i: usize| -> Vec<f64> {
        let traj = sampler.sample(crate::ensemble::realization_seed(master_seed, i));
        let mut acc = vec![0.0; n_bins + 1];
        let mut buf = vec![crate::linalg::C64::new(0.0, 0.0); seg_len];
        for ch in &traj.channels {
            for s in 0..n_seg {
                for k in 0..seg_len {
                    buf[k] = crate::linalg::C64::new(ch[s * hop + k] * window[k], 0.0);
                }
                fft.process(&mut buf);
                for (b, slot) in acc.iter_mut().enumerate() {
                    *slot += buf[b].norm_sqr() * dt / (seg_len as f64 * u);
                }
            }
        }
        acc
    };
    let merge = |mut a: Vec<f64>, b: Vec<f64>| {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
        a
    };
    let sum = exec::tree_reduce(policy, 0, n_traj, &leaf, &merge);
    let norm = (n_traj * recipe.channels.n_channels() * n_seg) as f64;
    let mut frequencies = Vec::new();
    let mut empirical = Vec::new();
    let mut target = Vec::new();
    for (b, s) in sum.iter().enumerate().skip(1) {
        let w = b as f64 * bin;
        frequencies.push(w);
        empirical.push(s / norm);
        target.push(if recipe.amplitude > 0.0 {
            target_psd(&recipe.target, recipe.thermal_rate, w)
        } else {
            0.0
        });
    }
    let num: f64 = empirical.iter().zip(&target).map(|(e, t)| (e - t).powi(2)).sum();
    let den: f64 = target.iter().map(|t| t * t).sum();
    Ok(PsdAudit {
        frequencies,
        empirical,
        target,
        relative_l2: (num / den).sqrt(),
        trajectories: n_traj,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn drude_recipe() -> NoiseRecipe {
        let sd = SpectralDensity::drude_lorentz(units::hz(2.0), units::hz(50.0)).unwrap();
        NoiseRecipe::new(sd, 1e-3, default_base_frequency(), None, 1.0, ChannelLayout::FourSite).unwrap()
    }

    #[test]
    fn default_band_covers_ten_cutoffs() {
        let r = drude_recipe();
        assert_eq!(r.cutoff_index, 5000);
        let sd = SpectralDensity::power_law(0.05, 3.0, units::hz(40.0)).unwrap();
        let r = NoiseRecipe::new(sd, 1e-4, default_base_frequency(), None, 1.0, ChannelLayout::FourSite).unwrap();
        assert!(r.cutoff_index as f64 * r.base_frequency >= 15.0 * units::hz(40.0) - 1e-9);
    }

    #[test]
    fn rejects_narrow_band() {
        let sd = SpectralDensity::drude_lorentz(1.0, units::hz(50.0)).unwrap();
        assert!(NoiseRecipe::new(sd, 1e-3, default_base_frequency(), Some(100), 1.0, ChannelLayout::FourSite).is_err());
        assert!(NoiseRecipe::new(sd, 1e-3, 0.0, None, 1.0, ChannelLayout::FourSite).is_err());
    }

    #[test]
    fn variance_approaches_drude_amplitude() {
        let r = drude_recipe();
        let c = 2.0 * units::hz(2.0) * r.thermal_rate;
        // truncation at 10 gamma keeps 2/pi * atan(10) of the variance
        let expected = c * 2.0 / std::f64::consts::PI * 10f64.atan();
        assert!((r.variance() - expected).abs() / expected < 1e-3);
    }

    #[test]
    fn doubling_alpha_halves_profile() {
        let mut r = drude_recipe();
        let p1 = r.profile();
        r.amplitude = 2.0;
        let p2 = r.profile();
        for (a, b) in p1.values.iter().zip(&p2.values) {
            assert!((a - 2.0 * b).abs() <= 1e-14 * a.abs());
        }
        let a1 = drude_recipe().line_amplitudes();
        let a2 = r.line_amplitudes();
        for (x, y) in a1.iter().zip(&a2) {
            assert!((x - y).abs() <= 1e-12 * x.abs());
        }
    }

    #[test]
    fn zero_alpha_silences_noise() {
        let mut r = drude_recipe();
        r.amplitude = 0.0;
        let t = sample_trajectory(&r, 3, SampleGrid { t0: 0.0, dt: 1e-4, len: 50 }).unwrap();
        assert!(t.channels.iter().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn four_site_decomposition_is_mean_free() {
        let traj = NoiseTrajectory {
            seed: 0,
            grid: SampleGrid { t0: 0.0, dt: 1.0, len: 1 },
            layout: ChannelLayout::FourSite,
            channels: vec![vec![1.0], vec![-2.0], vec![0.5], vec![4.0]],
        };
        let d = noise_hamiltonian(&traj, 0).diagonal();
        let mean = (1.0 - 2.0 + 0.5 + 4.0) / 4.0;
        for (i, &x) in [1.0, -2.0, 0.5, 4.0].iter().enumerate() {
            assert!((d[i] - (x - mean)).abs() < 1e-15);
        }
    }

    #[test]
    fn streams_are_independent_per_channel() {
        let r = drude_recipe();
        let a = r.phases(7, 0);
        let b = r.phases(7, 1);
        assert_ne!(a[..4], b[..4]);
        assert_eq!(a, r.phases(7, 0));
    }
}

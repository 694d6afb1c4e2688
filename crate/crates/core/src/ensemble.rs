//! Noise-ensemble dynamics: each realization is evolved under
//! `H_sys + H_noise(t)` with piecewise-constant slices and exact slice
//! exponentials, and the ensemble average approximates the open-system
//! density matrix.

use serde::{Deserialize, Serialize};

use crate::bathnoise::{noise_hamiltonian, NoiseRecipe, NoiseSampler, NoiseTrajectory, SampleGrid};
use crate::error::{domain, Result};
use crate::exec::{self, ExecPolicy};
use crate::grid::TimeGrid;
use crate::linalg::{self, c, CMat4, RMat4, C64};
use crate::model::DensityMatrix;

/// Seed of realization `k`, a SplitMix64 hash of the master seed and the index.
pub fn realization_seed(master: u64, k: usize) -> u64 {
    splitmix64(master ^ splitmix64(k as u64 ^ 0xA076_1D64_78BD_642F))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Default slice length `2 pi / (50 w_span)` with `w_span` the spectral radius
/// of the traceless system Hamiltonian plus the typical noise bound.
pub fn default_slice_step(h_sys: &RMat4, recipe: &NoiseRecipe) -> f64 {
    let h0 = linalg::traceless(h_sys);
    let ev = h0.symmetric_eigenvalues();
    let radius = ev.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let span = radius + recipe.typical_bound();
    2.0 * std::f64::consts::PI / (50.0 * span.max(f64::MIN_POSITIVE))
}

/// A noise-ensemble problem.
#[derive(Debug, Clone)]
pub struct EnsembleProblem {
    /// System Hamiltonian (rad/s); only its traceless part matters.
    pub h_sys: RMat4,
    pub recipe: NoiseRecipe,
    pub rho0: DensityMatrix,
    pub grid: TimeGrid,
    /// Slice length; `None` uses [`default_slice_step`].
    pub slice_dt: Option<f64>,
}

/// Slice layout derived from an [`EnsembleProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slicing {
    pub dt: f64,
    pub per_output: usize,
    pub total: usize,
}

impl EnsembleProblem {
    pub fn slicing(&self) -> Result<Slicing> {
        let target = match self.slice_dt {
            Some(dt) if dt.is_finite() && dt > 0.0 => dt,
            Some(dt) => return domain(format!("slice step must be positive, got {dt}")),
            None => default_slice_step(&self.h_sys, &self.recipe),
        };
        let per_output = (self.grid.dt / target * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        Ok(Slicing {
            dt: self.grid.dt / per_output as f64,
            per_output,
            total: per_output * (self.grid.len - 1),
        })
    }

    /// Noise is sampled at slice midpoints.
    pub fn noise_grid(&self, slicing: &Slicing) -> SampleGrid {
        SampleGrid {
            t0: 0.5 * slicing.dt,
            dt: slicing.dt,
            len: slicing.total,
        }
    }
}

/// Pure-state decomposition of the initial density matrix.
fn pure_components(rho: &DensityMatrix) -> Vec<(f64, [C64; 4])> {
    let m = rho.matrix();
    let eig = ((m + m.adjoint()) * c(0.5, 0.0)).symmetric_eigen();
    (0..4)
        .filter(|&k| eig.eigenvalues[k] > 1e-14)
        .map(|k| (eig.eigenvalues[k], std::array::from_fn(|i| eig.eigenvectors[(i, k)])))
        .collect()
}

/// Piecewise-constant evolution under `H_sys + H_noise(t_j)`.
pub struct SlicedEvolution<'a> {
    h0: RMat4,
    traj: &'a NoiseTrajectory,
    dt: f64,
    next: usize,
}

impl<'a> SlicedEvolution<'a> {
    pub fn new(h_sys: &RMat4, traj: &'a NoiseTrajectory, dt: f64) -> Self {
        SlicedEvolution {
            h0: linalg::traceless(h_sys),
            traj,
            dt,
            next: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.traj.grid.len - self.next
    }

    fn slice_hamiltonian(&self, j: usize) -> RMat4 {
        let d = noise_hamiltonian(self.traj, j).diagonal();
        let mut h = self.h0;
        for i in 0..4 {
            h[(i, i)] += d[i];
        }
        h
    }

    /// Propagator of the next slice.
    pub fn next_propagator(&mut self) -> CMat4 {
        let u = linalg::expm_real_symmetric(&self.slice_hamiltonian(self.next), self.dt);
        self.next += 1;
        u
    }

    /// Advances state vectors by `n` slices.
    pub fn advance_states(&mut self, states: &mut [[C64; 4]], n: usize) {
        for _ in 0..n {
            let h = self.slice_hamiltonian(self.next);
            self.next += 1;
            let eig = h.symmetric_eigen();
            let v = &eig.eigenvectors;
            let ph: [C64; 4] = std::array::from_fn(|k| C64::from_polar(1.0, -eig.eigenvalues[k] * self.dt));
            for psi in states.iter_mut() {
                let mut a = [C64::new(0.0, 0.0); 4];
                for k in 0..4 {
                    let mut s = C64::new(0.0, 0.0);
                    for i in 0..4 {
                        s += psi[i] * v[(i, k)];
                    }
                    a[k] = s * ph[k];
                }
                for i in 0..4 {
                    let mut s = C64::new(0.0, 0.0);
                    for k in 0..4 {
                        s += a[k] * v[(i, k)];
                    }
                    psi[i] = s;
                }
            }
        }
    }

    /// Product of the next `n` slice propagators.
    pub fn advance_propagator(&mut self, n: usize) -> CMat4 {
        let mut u = CMat4::identity();
        for _ in 0..n {
            u = self.next_propagator() * u;
        }
        u
    }
}

/// Density matrices of one realization on the output grid.
pub fn propagate_realization(problem: &EnsembleProblem, slicing: &Slicing, traj: &NoiseTrajectory) -> Vec<CMat4> {
    let comps = pure_components(&problem.rho0);
    let mut states: Vec<[C64; 4]> = comps.iter().map(|(_, v)| *v).collect();
    let mut evo = SlicedEvolution::new(&problem.h_sys, traj, slicing.dt);
    let mut out = Vec::with_capacity(problem.grid.len);
    let assemble = |states: &[[C64; 4]]| {
        let mut m = CMat4::zeros();
        for ((p, _), psi) in comps.iter().zip(states) {
            for i in 0..4 {
                for j in 0..4 {
                    m[(i, j)] += psi[i] * psi[j].conj() * *p;
                }
            }
        }
        m
    };
    out.push(assemble(&states));
    for _ in 1..problem.grid.len {
        evo.advance_states(&mut states, slicing.per_output);
        out.push(assemble(&states));
    }
    out
}

/// Running sums for means and standard errors.
#[derive(Debug, Clone)]
struct Moments {
    n: usize,
    sum: Vec<CMat4>,
    sq_re: Vec<RMat4>,
    sq_im: Vec<RMat4>,
}

impl Moments {
    fn from_sample(rhos: Vec<CMat4>) -> Self {
        let sq_re = rhos.iter().map(|m| m.map(|z| z.re * z.re)).collect();
        let sq_im = rhos.iter().map(|m| m.map(|z| z.im * z.im)).collect();
        Moments {
            n: 1,
            sum: rhos,
            sq_re,
            sq_im,
        }
    }

    fn merge(mut self, other: Moments) -> Self {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sq_re.iter_mut().zip(other.sq_re) {
            *a += b;
        }
        for (a, b) in self.sq_im.iter_mut().zip(other.sq_im) {
            *a += b;
        }
        self
    }
}

/// Ensemble mean with per-element standard errors (real part in `re`,
/// imaginary part in `im`).
#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean: Vec<DensityMatrix>,
    pub std_error: Vec<CMat4>,
    pub realizations: usize,
    pub master_seed: u64,
    pub slicing: Slicing,
}

impl EnsembleResult {
    pub fn populations(&self) -> Vec<[f64; 4]> {
        self.mean.iter().map(|m| m.populations()).collect()
    }
}

fn check_problem(problem: &EnsembleProblem, n: usize) -> Result<()> {
    if n == 0 {
        return domain("ensemble size must be at least 1");
    }
    if problem.h_sys != problem.h_sys.transpose() {
        return domain("system Hamiltonian must be symmetric");
    }
    Ok(())
}

/// Averages `n` realizations; realization `k` uses `realization_seed(master_seed, k)`.
pub fn ensemble_average(problem: &EnsembleProblem, n: usize, master_seed: u64, policy: ExecPolicy) -> Result<EnsembleResult> {
    check_problem(problem, n)?;
    let slicing = problem.slicing()?;
    let sampler = NoiseSampler::new(&problem.recipe, problem.noise_grid(&slicing))?;
    let leaf = |k: usize| {
        let traj = sampler.sample(realization_seed(master_seed, k));
        Moments::from_sample(propagate_realization(problem, &slicing, &traj))
    };
    let merge = |a: Moments, b: Moments| a.merge(b);
    let m = exec::tree_reduce(policy, 0, n, &leaf, &merge);
    Ok(finish(problem, m, master_seed, slicing))
}

fn finish(problem: &EnsembleProblem, m: Moments, master_seed: u64, slicing: Slicing) -> EnsembleResult {
    let nf = m.n as f64;
    let mean: Vec<CMat4> = m.sum.iter().map(|s| s / c(nf, 0.0)).collect();
    let std_error = mean
        .iter()
        .zip(m.sq_re.iter().zip(&m.sq_im))
        .map(|(mu, (sr, si))| {
            CMat4::from_fn(|i, j| {
                if m.n < 2 {
                    return c(0.0, 0.0);
                }
                let var = |sq: f64, mean: f64| ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
                c(
                    (var(sr[(i, j)], mu[(i, j)].re) / nf).sqrt(),
                    (var(si[(i, j)], mu[(i, j)].im) / nf).sqrt(),
                )
            })
        })
        .collect();
    EnsembleResult {
        times: problem.grid.times(),
        mean: mean.into_iter().map(DensityMatrix::from_unchecked).collect(),
        std_error,
        realizations: m.n,
        master_seed,
        slicing,
    }
}

/// Population traces of individual realizations `0..n`, for prefix averages.
pub fn realization_populations(
    problem: &EnsembleProblem,
    n: usize,
    master_seed: u64,
    policy: ExecPolicy,
) -> Result<Vec<Vec<[f64; 4]>>> {
    check_problem(problem, n)?;
    let slicing = problem.slicing()?;
    let sampler = NoiseSampler::new(&problem.recipe, problem.noise_grid(&slicing))?;
    Ok(exec::map_indexed(policy, n, |k| {
        let traj = sampler.sample(realization_seed(master_seed, k));
        propagate_realization(problem, &slicing, &traj)
            .iter()
            .map(|m| std::array::from_fn(|i| m[(i, i)].re))
            .collect()
    }))
}

/// Mean population trace of the first `n` realizations (pairwise summation).
pub fn prefix_mean(traces: &[Vec<[f64; 4]>], n: usize) -> Vec<[f64; 4]> {
    assert!(n >= 1 && n <= traces.len());
    let leaf = |k: usize| traces[k].clone();
    let merge = |mut a: Vec<[f64; 4]>, b: Vec<[f64; 4]>| {
        for (x, y) in a.iter_mut().zip(b) {
            for i in 0..4 {
                x[i] += y[i];
            }
        }
        a
    };
    let mut s = exec::tree_reduce(ExecPolicy::Sequential, 0, n, &leaf, &merge);
    for p in s.iter_mut() {
        for x in p.iter_mut() {
            *x /= n as f64;
        }
    }
    s
}

/// Sampled noise and propagators of one realization, grouped in segments of
/// `per_segment` output intervals (used as compilation targets).
pub fn segment_propagators(
    problem: &EnsembleProblem,
    master_seed: u64,
    k: usize,
    per_segment: usize,
) -> Result<Vec<CMat4>> {
    let slicing = problem.slicing()?;
    if per_segment == 0 || (problem.grid.len - 1) % per_segment != 0 {
        return domain("segment length must divide the number of output intervals");
    }
    let traj = crate::bathnoise::sample_trajectory(&problem.recipe, realization_seed(master_seed, k), problem.noise_grid(&slicing))?;
    let mut evo = SlicedEvolution::new(&problem.h_sys, &traj, slicing.dt);
    let n_seg = (problem.grid.len - 1) / per_segment;
    Ok((0..n_seg).map(|_| evo.advance_propagator(per_segment * slicing.per_output)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_distinct() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|k| realization_seed(42, k)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(realization_seed(1, 0), realization_seed(2, 0));
    }
}

//! Observables derived from trajectories: cluster eigenstates, the optimal
//! dephasing rate, the energy-transfer time, parameter scans and ensemble
//! convergence.

use serde::{Deserialize, Serialize};

use crate::dynamics::{self, Backend, OpenSystem};
use crate::ensemble;
use crate::error::{domain, Result};
use crate::exec::{self, ExecPolicy};
use crate::linalg::RMat4;

/// Default population-balance tolerance.
pub const DEFAULT_TAU: f64 = 0.02;

/// Eigenstates of the two dimers (sites 1-2 and 3-4) taken in isolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterSpectrum {
    /// E1 >= E2 (donor dimer), E3 >= E4 (acceptor dimer), rad/s.
    pub energies: [f64; 4],
    /// Mixing angles `atan2(2 J, e_i - e_j)` of the two dimers.
    pub theta: [f64; 2],
    /// Eigenvectors in the site basis, one per row, ordered like `energies`.
    pub vectors: [[f64; 4]; 4],
}

fn dimer(e1: f64, e2: f64, j: f64) -> (f64, f64, f64) {
    let mean = 0.5 * (e1 + e2);
    let half = (0.25 * (e1 - e2).powi(2) + j * j).sqrt();
    (mean + half, mean - half, (2.0 * j).atan2(e1 - e2))
}

pub fn cluster_eigens(h: &RMat4) -> Result<ClusterSpectrum> {
    if h != &h.transpose() || h.iter().any(|x| !x.is_finite()) {
        return domain("Hamiltonian must be finite and symmetric");
    }
    let (e1, e2, t12) = dimer(h[(0, 0)], h[(1, 1)], h[(0, 1)]);
    let (e3, e4, t34) = dimer(h[(2, 2)], h[(3, 3)], h[(2, 3)]);
    let (c12, s12) = ((t12 / 2.0).cos(), (t12 / 2.0).sin());
    let (c34, s34) = ((t34 / 2.0).cos(), (t34 / 2.0).sin());
    Ok(ClusterSpectrum {
        energies: [e1, e2, e3, e4],
        theta: [t12, t34],
        vectors: [
            [c12, s12, 0.0, 0.0],
            [-s12, c12, 0.0, 0.0],
            [0.0, 0.0, c34, s34],
            [0.0, 0.0, -s34, c34],
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalGamma {
    /// `E2 - E3` in rad/s.
    pub value: f64,
    pub warning: Option<String>,
}

/// Dephasing rate matching the gap between the lower donor and upper acceptor
/// cluster states.
pub fn optimal_gamma(h: &RMat4) -> Result<OptimalGamma> {
    let s = cluster_eigens(h)?;
    let j12 = h[(0, 1)].abs();
    let j34 = h[(2, 3)].abs();
    let j23 = h[(1, 2)].abs();
    let warning = if j23 > 0.5 * j12.min(j34) {
        Some(format!(
            "inter-cluster coupling |J23| = {:.3e} exceeds half the intra-cluster coupling {:.3e}; cluster picture unreliable",
            j23,
            j12.min(j34)
        ))
    } else {
        None
    };
    Ok(OptimalGamma {
        value: s.energies[1] - s.energies[2],
        warning,
    })
}

/// Transfer time: first time donor and acceptor populations balance to within
/// `tau` and stay within `2 tau` for the rest of the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EetTime {
    pub time: Option<f64>,
    pub tau: f64,
    pub final_imbalance: f64,
}

impl EetTime {
    pub fn reached(&self) -> bool {
        self.time.is_some()
    }
}

pub fn imbalance(p: &[f64; 4]) -> f64 {
    (p[0] + p[1]) - (p[2] + p[3])
}

pub fn eet_time(times: &[f64], populations: &[[f64; 4]], tau: f64) -> Result<EetTime> {
    if !(tau > 0.0) {
        return domain(format!("balance tolerance must be positive, got {tau}"));
    }
    if times.len() != populations.len() || times.is_empty() {
        return domain("times and populations must be non-empty and of equal length");
    }
    let d: Vec<f64> = populations.iter().map(|p| imbalance(p).abs()).collect();
    // suffix maxima
    let mut tail = vec![0.0; d.len()];
    let mut m: f64 = 0.0;
    for k in (0..d.len()).rev() {
        m = m.max(d[k]);
        tail[k] = m;
    }
    let time = (0..d.len()).find(|&k| d[k] <= tau && tail[k] <= 2.0 * tau).map(|k| times[k]);
    Ok(EetTime {
        time,
        tau,
        final_imbalance: *d.last().unwrap(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanPoint {
    pub parameter: f64,
    pub eet: EetTime,
    pub times: Vec<f64>,
    pub populations: Vec<[f64; 4]>,
    pub diagnostics: dynamics::RunDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scan {
    pub points: Vec<ScanPoint>,
    /// Index of the smallest transfer time among points that balance.
    pub argmin: Option<usize>,
}

impl Scan {
    pub fn best_parameter(&self) -> Option<f64> {
        self.argmin.map(|i| self.points[i].parameter)
    }
}

/// Runs `build(p)` for every parameter and collects transfer times.
pub fn scan<F>(params: &[f64], build: F, backend: &Backend, tau: f64, policy: ExecPolicy) -> Result<Scan>
where
    F: Fn(f64) -> Result<OpenSystem> + Sync + Send,
{
    if params.is_empty() {
        return domain("scan needs at least one parameter value");
    }
    let results = exec::map_indexed(policy, params.len(), |i| -> Result<ScanPoint> {
        let prob = build(params[i])?;
        let out = dynamics::simulate(&prob, backend, policy)?;
        let pops = out.populations();
        Ok(ScanPoint {
            parameter: params[i],
            eet: eet_time(&out.times, &pops, tau)?,
            times: out.times,
            populations: pops,
            diagnostics: out.diagnostics,
        })
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    let argmin = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.eet.time.map(|t| (i, t)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    Ok(Scan { points, argmin })
}

/// Ensemble-vs-reference deviation as a function of ensemble size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub sizes: Vec<usize>,
    /// Largest population deviation over sites and output times.
    pub deviations: Vec<f64>,
    /// Standard error of the ensemble-mean population where that deviation occurs.
    pub std_errors: Vec<f64>,
    /// Non-increasing within one standard error of the larger ensemble.
    pub monotone: bool,
    /// Least-squares fit `deviation = c / sqrt(N)`.
    pub fit_c: f64,
    pub r_squared: f64,
}

pub fn max_deviation(a: &[[f64; 4]], b: &[[f64; 4]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| (0..4).map(move |i| (x[i] - y[i]).abs()))
        .fold(0.0, f64::max)
}

/// Position `(time index, site)` of the largest deviation.
fn argmax_deviation(a: &[[f64; 4]], b: &[[f64; 4]]) -> (usize, usize) {
    let mut best = (0, 0, -1.0);
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        for i in 0..4 {
            let d = (x[i] - y[i]).abs();
            if d > best.2 {
                best = (k, i, d);
            }
        }
    }
    (best.0, best.1)
}

/// Standard error of the mean of population `site` at time index `k`.
pub fn standard_error_at(traces: &[Vec<[f64; 4]>], k: usize, site: usize) -> f64 {
    let n = traces.len();
    if n < 2 {
        return 0.0;
    }
    let mean = traces.iter().map(|t| t[k][site]).sum::<f64>() / n as f64;
    let var = traces.iter().map(|t| (t[k][site] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

/// Fits `y = c / sqrt(n)` through the origin and reports R^2 about the mean.
pub fn inverse_sqrt_fit(sizes: &[usize], values: &[f64]) -> (f64, f64) {
    let x: Vec<f64> = sizes.iter().map(|&n| 1.0 / (n as f64).sqrt()).collect();
    let c = x.iter().zip(values).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let ss_tot: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(values).map(|(a, v)| (v - c * a).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN };
    (c, r2)
}

/// Ensembles of nested sizes (realizations are shared between sizes) compared
/// with a reference population trace on the same grid.
pub fn convergence_study(
    problem: &OpenSystem,
    sizes: &[usize],
    seed: u64,
    reference: &[[f64; 4]],
    policy: ExecPolicy,
) -> Result<ConvergenceStudy> {
    let nmax = *sizes.iter().max().ok_or_else(|| crate::Error::Domain("no ensemble sizes".into()))?;
    if sizes.contains(&0) {
        return domain("ensemble sizes must be positive");
    }
    let traces = ensemble::realization_populations(&problem.ensemble_problem()?, nmax, seed, policy)?;
    let mut deviations = Vec::with_capacity(sizes.len());
    let mut std_errors = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mean = ensemble::prefix_mean(&traces, n);
        let (k, i) = argmax_deviation(&mean, reference);
        deviations.push(max_deviation(&mean, reference));
        std_errors.push(standard_error_at(&traces[..n], k, i));
    }
    let monotone = (1..deviations.len()).all(|i| deviations[i] <= deviations[i - 1] + std_errors[i]);
    let (fit_c, r_squared) = inverse_sqrt_fit(sizes, &deviations);
    Ok(ConvergenceStudy {
        sizes: sizes.to_vec(),
        deviations,
        std_errors,
        monotone,
        fit_c,
        r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eet_time_simple() {
        let times: Vec<f64> = (0..11).map(|k| k as f64).collect();
        let pops: Vec<[f64; 4]> = (0..11)
            .map(|k| {
                let d = (1.0 - k as f64 / 5.0).max(0.0);
                let pd = 0.5 + d / 2.0;
                [pd, 0.0, 1.0 - pd, 0.0]
            })
            .collect();
        let r = eet_time(&times, &pops, 0.02).unwrap();
        assert_eq!(r.time, Some(5.0));
        assert!(eet_time(&times, &pops, 0.0).is_err());
    }

    #[test]
    fn eet_time_requires_staying_balanced() {
        let times = vec![0.0, 1.0, 2.0, 3.0];
        let pops = vec![[1.0, 0.0, 0.0, 0.0], [0.5, 0.0, 0.5, 0.0], [0.8, 0.0, 0.2, 0.0], [0.5, 0.0, 0.5, 0.0]];
        assert_eq!(eet_time(&times, &pops, 0.02).unwrap().time, Some(3.0));
        let never = vec![[1.0, 0.0, 0.0, 0.0]; 4];
        assert_eq!(eet_time(&times, &never, 0.02).unwrap().time, None);
    }

    #[test]
    fn inverse_sqrt_fit_exact() {
        let sizes = [50, 100, 200, 500];
        let vals: Vec<f64> = sizes.iter().map(|&n| 0.3 / (n as f64).sqrt()).collect();
        let (c, r2) = inverse_sqrt_fit(&sizes, &vals);
        assert!((c - 0.3).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
    }
}

//! Evaluation of cosine combs `sum_j a_j cos(j w0 t_k + phi_j)` on a uniform
//! time grid with the chirp-z transform (Bluestein), exact up to rounding.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::linalg::C64;

/// Products `N * L` below this are evaluated by direct summation.
const DIRECT_LIMIT: usize = 1 << 16;

/// Reusable evaluator for a fixed line count, base frequency and sample grid.
pub struct CombEvaluator {
    n_lines: usize,
    w0: f64,
    t0: f64,
    dt: f64,
    len: usize,
    plan: Option<ChirpPlan>,
}

struct ChirpPlan {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `W^{j^2/2}` for inputs.
    chirp_in: Vec<C64>,
    /// `W^{k^2/2} * W^{k}` for outputs (the extra factor accounts for lines starting at j = 1).
    chirp_out: Vec<C64>,
    /// FFT of the kernel `W^{-m^2/2}`.
    kernel: Vec<C64>,
}

fn half_square_phase(theta: f64, m: usize) -> f64 {
    let sq = (m as u128 * m as u128) as f64;
    (0.5 * theta * sq) % (2.0 * std::f64::consts::PI)
}

impl CombEvaluator {
    pub fn new(n_lines: usize, w0: f64, t0: f64, dt: f64, len: usize) -> Self {
        let plan = if n_lines.saturating_mul(len) > DIRECT_LIMIT {
            Some(ChirpPlan::new(n_lines, w0 * dt, len))
        } else {
            None
        };
        CombEvaluator {
            n_lines,
            w0,
            t0,
            dt,
            len,
            plan,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn n_lines(&self) -> usize {
        self.n_lines
    }

    /// Evaluates the comb with amplitudes `amps[j]` and phases `phases[j]`
    /// for lines `(j + 1) * w0`.
    pub fn evaluate(&self, amps: &[f64], phases: &[f64]) -> Vec<f64> {
        assert_eq!(amps.len(), self.n_lines);
        assert_eq!(phases.len(), self.n_lines);
        match &self.plan {
            None => direct_sum(amps, phases, self.w0, self.t0, self.dt, self.len),
            Some(plan) => {
                let coeffs: Vec<C64> = amps
                    .iter()
                    .zip(phases)
                    .enumerate()
                    .map(|(j, (&a, &p))| C64::from_polar(a, p + (j + 1) as f64 * self.w0 * self.t0))
                    .collect();
                plan.run(&coeffs, self.len)
            }
        }
    }
}

/// Reference implementation: explicit cosine sum.
pub fn direct_sum(amps: &[f64], phases: &[f64], w0: f64, t0: f64, dt: f64, len: usize) -> Vec<f64> {
    (0..len)
        .map(|k| {
            let t = t0 + k as f64 * dt;
            amps.iter()
                .zip(phases)
                .enumerate()
                .map(|(j, (&a, &p))| a * ((j + 1) as f64 * w0 * t + p).cos())
                .sum()
        })
        .collect()
}

impl ChirpPlan {
    fn new(n: usize, theta: f64, len: usize) -> Self {
        let size = (n + len - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let chirp_in = (0..n).map(|j| C64::from_polar(1.0, half_square_phase(theta, j))).collect();
        let chirp_out = (0..len)
            .map(|k| {
                let ph = half_square_phase(theta, k) + (theta * k as f64) % (2.0 * std::f64::consts::PI);
                C64::from_polar(1.0 / size as f64, ph)
            })
            .collect();
        let mut kernel = vec![C64::new(0.0, 0.0); size];
        for (m, slot) in kernel.iter_mut().enumerate().take(len) {
            *slot = C64::from_polar(1.0, -half_square_phase(theta, m));
        }
        for m in 1..n {
            kernel[size - m] = C64::from_polar(1.0, -half_square_phase(theta, m));
        }
        fwd.process(&mut kernel);
        ChirpPlan {
            size,
            fwd,
            inv,
            chirp_in,
            chirp_out,
            kernel,
        }
    }

    fn run(&self, coeffs: &[C64], len: usize) -> Vec<f64> {
        let mut buf = vec![C64::new(0.0, 0.0); self.size];
        for (j, (&cj, &w)) in coeffs.iter().zip(&self.chirp_in).enumerate() {
            buf[j] = cj * w;
        }
        self.fwd.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel) {
            *b *= k;
        }
        self.inv.process(&mut buf);
        (0..len).map(|k| (buf[k] * self.chirp_out[k]).re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chirp_matches_direct_sum() {
        let n = 700;
        let len = 1500;
        let w0 = 2.0 * std::f64::consts::PI * 0.1;
        let dt = 3.7e-4;
        let t0 = 0.123;
        let amps: Vec<f64> = (0..n).map(|j| 1.0 / (1.0 + j as f64 * 0.01)).collect();
        let phases: Vec<f64> = (0..n).map(|j| (j as f64 * 1.618).fract() * 6.283).collect();
        let ev = CombEvaluator::new(n, w0, t0, dt, len);
        assert!(ev.plan.is_some());
        let fast = ev.evaluate(&amps, &phases);
        let slow = direct_sum(&amps, &phases, w0, t0, dt, len);
        let scale: f64 = amps.iter().sum();
        let err = fast.iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err / scale < 1e-12, "relative error {}", err / scale);
    }
}

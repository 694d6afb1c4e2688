//! Reference data and small helpers shared by the acceptance run.

use std::io::Write;
use std::time::Instant;

use excitonbench_core::grape::{self, ControlGrid, ControlSystem};
use excitonbench_core::linalg::{self, c, CMat4, RMat4};
use excitonbench_core::model::units::hz;
use excitonbench_core::nmr::SpinSystem;
use excitonbench_core::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference NMR-frame Hamiltonians `H / 2 pi` in kHz, keyed by the
/// donor-acceptor spacing in angstrom.
pub const REFERENCE_HAMILTONIANS_KHZ: [(f64, [[f64; 4]; 4]); 3] = [
    (
        13.4,
        [
            [130.0, 1.2608, 0.1612, 0.0474],
            [1.2608, 129.0, 1.3190, 0.1612],
            [0.1612, 1.3190, 123.0, 1.2608],
            [0.0474, 0.1612, 1.2608, 122.0],
        ],
    ),
    (
        11.3,
        [
            [130.0, 2.1025, 0.1283, 0.0474],
            [2.1025, 129.0, 0.5759, 0.1283],
            [0.1283, 0.5759, 123.0, 2.1025],
            [0.0474, 0.1283, 2.1025, 122.0],
        ],
    ),
    (
        8.0,
        [
            [130.0, 5.9251, 0.0926, 0.0474],
            [5.9251, 129.0, 0.2195, 0.0926],
            [0.0926, 0.2195, 123.0, 5.9251],
            [0.0474, 0.0926, 5.9251, 122.0],
        ],
    ),
];

/// Reference optimal bath rate used by the coarse scan, in Hz.
pub const REFERENCE_OPTIMAL_GAMMA_HZ: f64 = 2668.0;

pub fn reference_matrix(r: f64) -> Option<RMat4> {
    REFERENCE_HAMILTONIANS_KHZ
        .iter()
        .find(|(x, _)| *x == r)
        .map(|(_, m)| RMat4::from_fn(|i, j| m[i][j]))
}

/// Worst relative gradient error against central differences over `trials`
/// random control grids and random unitary targets.
pub fn gradient_check(trials: usize, seed: u64, h: f64) -> Result<f64> {
    let spin = SpinSystem::default();
    let sys = ControlSystem::new(&spin);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for trial in 0..trials {
        let slices = 5 + trial % 7;
        let dt = spin.default_control_duration() / slices as f64;
        let amplitudes = (0..slices)
            .map(|_| std::array::from_fn(|_| hz(200.0) * (2.0 * rng.random::<f64>() - 1.0)))
            .collect();
        let grid = ControlGrid { dt, amplitudes };
        let a = CMat4::from_fn(|_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let target = linalg::expm_hermitian(&((a + a.adjoint()) * c(hz(2e3), 0.0)), 1e-3);
        let (_, g) = grape::gradient(&target, &sys, &grid)?;
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..slices {
            for k in 0..grape::N_CONTROLS {
                let mut p = grid.clone();
                p.amplitudes[j][k] += h;
                let mut m = grid.clone();
                m.amplitudes[j][k] -= h;
                let fd = (grape::fidelity(&target, &sys, &p) - grape::fidelity(&target, &sys, &m)) / (2.0 * h);
                num += (fd - g[j][k]).powi(2);
                den += g[j][k].powi(2);
            }
        }
        worst = worst.max((num / den).sqrt());
    }
    Ok(worst)
}

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

/// Runs numbered criteria in order and prints one line per criterion as
/// soon as it finishes.
#[derive(Debug, Default)]
pub struct Sheet {
    pub results: Vec<(usize, String, bool)>,
}

impl Sheet {
    pub fn run(&mut self, id: usize, name: &str, f: impl FnOnce() -> Result<Verdict>) {
        let t0 = Instant::now();
        let v = f().unwrap_or_else(|e| Verdict::new(false, format!("error: {e}")));
        let line = format!(
            "{} criterion {id:>2} {name}: {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            t0.elapsed().as_secs_f64()
        );
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{line}");
        let _ = out.flush();
        self.results.push((id, name.to_string(), v.pass));
    }

    pub fn passed(&self) -> usize {
        self.results.iter().filter(|r| r.2).count()
    }

    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.2)
    }
}

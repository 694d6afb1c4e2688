//! Hierarchical equations of motion for four sites, each coupled to its own
//! Drude-Lorentz bath in the high-temperature (single exponential) limit.
//!
//! Auxiliary matrices are stored rescaled,
//! `s_n = sigma_n / sqrt(prod_j n_j! c_j^n_j)` with `c_j = 2 lambda_j k_B T / hbar`,
//! which keeps their magnitudes O(1) at all depths. The reduced density matrix
//! `sigma_0` is unaffected by the rescaling.

pub mod complexity;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::exec::ExecPolicy;
use crate::grid::TimeGrid;
use crate::linalg::{self, c, CMat4, RMat4, C64};
use crate::model::units;
use crate::model::DensityMatrix;

pub const N_SITES: usize = 4;
/// Trace drift of the reduced density matrix that aborts an integration.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

/// Drude-Lorentz bath on one site; `lambda` and `gamma` in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrudeBath {
    pub lambda: f64,
    pub gamma: f64,
}

/// Independent baths on the four sites at a common temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeomBath {
    pub sites: [DrudeBath; N_SITES],
    /// k_B T / hbar in rad/s.
    pub thermal_rate: f64,
}

impl HeomBath {
    pub fn new(sites: [DrudeBath; N_SITES], temperature_k: f64) -> Result<Self> {
        if !(temperature_k.is_finite() && temperature_k > 0.0) {
            return domain(format!("temperature must be positive (inverse temperature > 0), got {temperature_k} K"));
        }
        for (j, b) in sites.iter().enumerate() {
            if !(b.lambda.is_finite() && b.lambda >= 0.0) {
                return domain(format!("bath {}: lambda must be >= 0", j + 1));
            }
            if !(b.gamma.is_finite() && b.gamma > 0.0) {
                return domain(format!("bath {}: gamma must be > 0", j + 1));
            }
        }
        Ok(HeomBath {
            sites,
            thermal_rate: units::thermal_rate(temperature_k),
        })
    }

    pub fn uniform(lambda: f64, gamma: f64, temperature_k: f64) -> Result<Self> {
        Self::new([DrudeBath { lambda, gamma }; N_SITES], temperature_k)
    }

    /// Bath correlation amplitude `c_j = 2 lambda_j k_B T / hbar` (rad^2/s^2).
    pub fn amplitude(&self, j: usize) -> f64 {
        2.0 * self.sites[j].lambda * self.thermal_rate
    }

    pub fn max_gamma(&self) -> f64 {
        self.sites.iter().map(|b| b.gamma).fold(0.0, f64::max)
    }

    pub fn max_amplitude(&self) -> f64 {
        (0..N_SITES).map(|j| self.amplitude(j)).fold(0.0, f64::max)
    }
}

const NONE: u32 = u32::MAX;

/// Enumeration of the auxiliary density matrices up to a truncation depth.
///
/// Index vectors are ordered by level, then lexicographically; index 0 is the
/// reduced density matrix.
#[derive(Debug, Clone)]
pub struct HierarchyLayout {
    pub depth: usize,
    pub indices: Vec<[u8; N_SITES]>,
    up: Vec<[u32; N_SITES]>,
    down: Vec<[u32; N_SITES]>,
}

impl HierarchyLayout {
    pub fn new(depth: usize) -> Result<Self> {
        if depth == 0 || depth > 60 {
            return domain(format!("truncation depth must be in 1..=60, got {depth}"));
        }
        let mut indices: Vec<[u8; N_SITES]> = Vec::new();
        for level in 0..=depth {
            let mut current = Vec::new();
            compositions(level, N_SITES, &mut [0u8; N_SITES], 0, &mut current);
            current.sort_unstable_by(|a, b| b.cmp(a));
            indices.extend(current);
        }
        let lookup: std::collections::HashMap<[u8; N_SITES], u32> =
            indices.iter().enumerate().map(|(i, n)| (*n, i as u32)).collect();
        let mut up = Vec::with_capacity(indices.len());
        let mut down = Vec::with_capacity(indices.len());
        for n in &indices {
            let mut u = [NONE; N_SITES];
            let mut d = [NONE; N_SITES];
            for j in 0..N_SITES {
                let mut m = *n;
                m[j] += 1;
                if let Some(&i) = lookup.get(&m) {
                    u[j] = i;
                }
                if n[j] > 0 {
                    let mut m = *n;
                    m[j] -= 1;
                    d[j] = lookup[&m];
                }
            }
            up.push(u);
            down.push(d);
        }
        Ok(HierarchyLayout {
            depth,
            indices,
            up,
            down,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn level(&self, i: usize) -> usize {
        self.indices[i].iter().map(|&x| x as usize).sum()
    }
}

fn compositions(total: usize, parts: usize, cur: &mut [u8; N_SITES], pos: usize, out: &mut Vec<[u8; N_SITES]>) {
    if pos == parts - 1 {
        cur[pos] = total as u8;
        out.push(*cur);
        return;
    }
    for k in 0..=total {
        cur[pos] = k as u8;
        compositions(total - k, parts, cur, pos + 1, out);
    }
}

/// Precomputed coefficients of the hierarchy right-hand side.
#[derive(Debug, Clone)]
pub struct HeomOperator {
    layout: Arc<HierarchyLayout>,
    /// Traceless system Hamiltonian, row-major.
    h: [[f64; 4]; 4],
    damping: Vec<f64>,
    up_coef: Vec<[f64; N_SITES]>,
    down_comm: Vec<[f64; N_SITES]>,
    down_anti: Vec<[f64; N_SITES]>,
    spectral_spread: f64,
    bath: HeomBath,
}

impl HeomOperator {
    pub fn new(h: &RMat4, bath: &HeomBath, layout: Arc<HierarchyLayout>) -> Self {
        let h0 = linalg::traceless(h);
        let hm: [[f64; 4]; 4] = std::array::from_fn(|a| std::array::from_fn(|b| h0[(a, b)]));
        let n = layout.len();
        let mut damping = Vec::with_capacity(n);
        let mut up_coef = Vec::with_capacity(n);
        let mut down_comm = Vec::with_capacity(n);
        let mut down_anti = Vec::with_capacity(n);
        for idx in &layout.indices {
            let mut d = 0.0;
            let mut u = [0.0; N_SITES];
            let mut dc = [0.0; N_SITES];
            let mut da = [0.0; N_SITES];
            for j in 0..N_SITES {
                let b = bath.sites[j];
                let cj = bath.amplitude(j);
                let nj = idx[j] as f64;
                d += nj * b.gamma;
                if cj > 0.0 {
                    u[j] = ((nj + 1.0) * cj).sqrt();
                    dc[j] = (nj * cj).sqrt();
                    da[j] = (nj / cj).sqrt() * b.lambda * b.gamma;
                }
            }
            damping.push(d);
            up_coef.push(u);
            down_comm.push(dc);
            down_anti.push(da);
        }
        HeomOperator {
            layout,
            h: hm,
            damping,
            up_coef,
            down_comm,
            down_anti,
            spectral_spread: linalg::spectral_spread(&h0),
            bath: *bath,
        }
    }

    pub fn layout(&self) -> &Arc<HierarchyLayout> {
        &self.layout
    }

    /// Largest frequency scale the integrator has to resolve.
    pub fn max_frequency(&self) -> f64 {
        let depth = self.layout.depth as f64;
        self.spectral_spread
            .max(depth * self.bath.max_gamma())
            .max(2.0 * (depth * self.bath.max_amplitude()).sqrt())
    }

    /// Largest stable step under the `2 pi / (20 w_max)` rule.
    pub fn max_step(&self) -> f64 {
        2.0 * std::f64::consts::PI / (20.0 * self.max_frequency())
    }

    fn block(&self, i: usize, state: &[CMat4], out: &mut CMat4) {
        let s = state[i].as_slice();
        let h = &self.h;
        let d = self.damping[i];
        let o = out.as_mut_slice();
        // Column-major storage: element (a, b) lives at a + 4 b.
        // -i[H, s] - damping * s with real symmetric H.
        for b in 0..4 {
            for a in 0..4 {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..4 {
                    acc += s[k + 4 * b] * h[a][k] - s[a + 4 * k] * h[k][b];
                }
                o[a + 4 * b] = C64::new(acc.im, -acc.re) - s[a + 4 * b] * d;
            }
        }
        let up = &self.layout.up[i];
        let down = &self.layout.down[i];
        for j in 0..N_SITES {
            if up[j] != NONE && self.up_coef[i][j] != 0.0 {
                // + sqrt((n_j+1) c_j) * i [V_j, s_{n+e_j}]
                let x = state[up[j] as usize].as_slice();
                let alpha = c(0.0, self.up_coef[i][j]);
                for k in 0..4 {
                    o[j + 4 * k] += alpha * x[j + 4 * k];
                    o[k + 4 * j] -= alpha * x[k + 4 * j];
                }
            }
            if down[j] != NONE && self.down_comm[i][j] != 0.0 {
                // + sqrt(n_j / c_j) * (i c_j [V_j, x] + lambda_j gamma_j {V_j, x})
                let x = state[down[j] as usize].as_slice();
                let p = c(0.0, self.down_comm[i][j]);
                let q = c(self.down_anti[i][j], 0.0);
                for k in 0..4 {
                    o[j + 4 * k] += (p + q) * x[j + 4 * k];
                    o[k + 4 * j] += (q - p) * x[k + 4 * j];
                }
            }
        }
    }

    /// Writes `d state / dt` into `out`.
    pub fn apply(&self, state: &[CMat4], out: &mut [CMat4], policy: ExecPolicy) {
        debug_assert_eq!(state.len(), self.layout.len());
        #[cfg(feature = "parallel")]
        if policy.is_parallel() {
            use rayon::prelude::*;
            out.par_iter_mut()
                .enumerate()
                .with_min_len(16)
                .for_each(|(i, o)| self.block(i, state, o));
            return;
        }
        let _ = policy;
        for (i, o) in out.iter_mut().enumerate() {
            self.block(i, state, o);
        }
    }
}

/// Full hierarchy state.
#[derive(Debug, Clone)]
pub struct HierarchyState {
    pub layout: Arc<HierarchyLayout>,
    pub blocks: Vec<CMat4>,
}

impl HierarchyState {
    pub fn from_density(rho: &DensityMatrix, layout: Arc<HierarchyLayout>) -> Self {
        let mut blocks = vec![CMat4::zeros(); layout.len()];
        blocks[0] = *rho.matrix();
        HierarchyState { layout, blocks }
    }

    pub fn reduced(&self) -> DensityMatrix {
        DensityMatrix::from_unchecked(self.blocks[0])
    }
}

struct Rk4 {
    k1: Vec<CMat4>,
    k2: Vec<CMat4>,
    k3: Vec<CMat4>,
    k4: Vec<CMat4>,
    tmp: Vec<CMat4>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = vec![CMat4::zeros(); n];
        Rk4 {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    fn step(&mut self, op: &HeomOperator, y: &mut [CMat4], dt: f64, policy: ExecPolicy) {
        let h2 = c(dt / 2.0, 0.0);
        let h = c(dt, 0.0);
        op.apply(y, &mut self.k1, policy);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k1[i] * h2;
        }
        op.apply(&self.tmp, &mut self.k2, policy);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k2[i] * h2;
        }
        op.apply(&self.tmp, &mut self.k3, policy);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k3[i] * h;
        }
        op.apply(&self.tmp, &mut self.k4, policy);
        let w = c(dt / 6.0, 0.0);
        let two = c(2.0, 0.0);
        for i in 0..y.len() {
            y[i] += (self.k1[i] + self.k2[i] * two + self.k3[i] * two + self.k4[i]) * w;
        }
    }
}

/// Reduced dynamics on a uniform output grid.
#[derive(Debug, Clone)]
pub struct HeomTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub depth: usize,
    pub n_auxiliary: usize,
    pub step: f64,
    pub steps: usize,
}

impl HeomTrajectory {
    pub fn populations(&self) -> Vec<[f64; 4]> {
        self.states.iter().map(|s| s.populations()).collect()
    }

    /// Largest population difference to another trajectory on the same grid.
    pub fn max_population_difference(&self, other: &HeomTrajectory) -> f64 {
        self.states
            .iter()
            .zip(&other.states)
            .flat_map(|(a, b)| {
                let (pa, pb) = (a.populations(), b.populations());
                (0..4).map(move |i| (pa[i] - pb[i]).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Integrates the hierarchy at a fixed depth.
///
/// `step_scale` multiplies the default step (1.0 normally, 0.5 for the
/// halving self-check).
pub fn propagate(
    h: &RMat4,
    bath: &HeomBath,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    depth: usize,
    step_scale: f64,
    policy: ExecPolicy,
) -> Result<HeomTrajectory> {
    let layout = Arc::new(HierarchyLayout::new(depth)?);
    let op = HeomOperator::new(h, bath, layout.clone());
    let max_step = op.max_step() * step_scale;
    let per_output = (grid.dt / max_step * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let dt = grid.dt / per_output as f64;
    let mut state = HierarchyState::from_density(rho0, layout.clone());
    let mut rk = Rk4::new(layout.len());
    let mut states = Vec::with_capacity(grid.len);
    states.push(state.reduced());
    let mut step_count = 0usize;
    for k in 1..grid.len {
        for _ in 0..per_output {
            rk.step(&op, &mut state.blocks, dt, policy);
            step_count += 1;
        }
        let rho = state.blocks[0];
        let drift = (linalg::trace(&rho) - c(1.0, 0.0)).norm();
        if !drift.is_finite() || rho.iter().any(|z: &C64| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Integration {
                step: step_count,
                time: grid.time(k),
                reason: "non-finite state".into(),
            });
        }
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::Integration {
                step: step_count,
                time: grid.time(k),
                reason: format!("trace drift {drift:.3e} exceeds {TRACE_DRIFT_LIMIT:.0e}"),
            });
        }
        states.push(state.reduced());
    }
    Ok(HeomTrajectory {
        times: grid.times(),
        states,
        depth,
        n_auxiliary: layout.len(),
        step: dt,
        steps: step_count,
    })
}

/// Options for the automatic depth search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthSearch {
    pub start: usize,
    pub cap: usize,
    /// Required max population change between successive depths.
    pub tolerance: f64,
    /// Re-run the final depth with half the step and report the difference.
    pub halving_check: bool,
}

impl Default for DepthSearch {
    fn default() -> Self {
        DepthSearch {
            start: 6,
            cap: 12,
            tolerance: 1e-4,
            halving_check: false,
        }
    }
}

/// Result of [`solve`] with convergence diagnostics.
#[derive(Debug, Clone)]
pub struct HeomSolution {
    pub trajectory: HeomTrajectory,
    /// Depth whose trajectory is returned.
    pub depth: usize,
    /// Max population difference between the two deepest runs.
    pub depth_metric: f64,
    pub converged: bool,
    pub step_metric: Option<f64>,
    pub depth_history: Vec<(usize, f64)>,
    pub warnings: Vec<String>,
    pub runtime_s: f64,
}

/// Runs the hierarchy, raising the depth from `search.start` until two
/// successive depths agree within `search.tolerance` or `search.cap` is reached.
pub fn solve(
    h: &RMat4,
    bath: &HeomBath,
    rho0: &DensityMatrix,
    grid: &TimeGrid,
    search: &DepthSearch,
    policy: ExecPolicy,
) -> Result<HeomSolution> {
    if search.start == 0 || search.start >= search.cap {
        return domain(format!(
            "depth search needs 1 <= start < cap, got start {} cap {}",
            search.start, search.cap
        ));
    }
    let t0 = Instant::now();
    let mut prev = propagate(h, bath, rho0, grid, search.start, 1.0, policy)?;
    let mut history = Vec::new();
    let mut metric = f64::INFINITY;
    let mut converged = false;
    for depth in (search.start + 1)..=search.cap {
        let next = propagate(h, bath, rho0, grid, depth, 1.0, policy)?;
        metric = next.max_population_difference(&prev);
        history.push((depth, metric));
        prev = next;
        if metric <= search.tolerance {
            converged = true;
            break;
        }
    }
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!(
            "hierarchy not converged at depth cap {}: successive depths differ by {:.3e}",
            search.cap, metric
        ));
    }
    if metric > 1e-3 {
        warnings.push(format!("depth {} vs {} population difference {:.3e} exceeds 1e-3", prev.depth, prev.depth - 1, metric));
    }
    let step_metric = if search.halving_check {
        let half = propagate(h, bath, rho0, grid, prev.depth, 0.5, policy)?;
        Some(half.max_population_difference(&prev))
    } else {
        None
    };
    Ok(HeomSolution {
        depth: prev.depth,
        trajectory: prev,
        depth_metric: metric,
        converged,
        step_metric,
        depth_history: history,
        warnings,
        runtime_s: t0.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_counts_match_binomial() {
        for depth in 1..=8 {
            let l = HierarchyLayout::new(depth).unwrap();
            let expected = (1..=4).fold(1u64, |acc, k| acc * (depth as u64 + k) / k);
            assert_eq!(l.len() as u64, expected);
            assert_eq!(l.indices[0], [0; 4]);
            for i in 1..l.len() {
                assert!(l.level(i) >= l.level(i - 1));
            }
        }
    }

    #[test]
    fn neighbours_are_consistent() {
        let l = HierarchyLayout::new(5).unwrap();
        for i in 0..l.len() {
            for j in 0..4 {
                if l.up[i][j] != NONE {
                    let u = l.up[i][j] as usize;
                    assert_eq!(l.down[u][j] as usize, i);
                    assert_eq!(l.level(u), l.level(i) + 1);
                } else {
                    assert_eq!(l.level(i), 5);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_temperature() {
        assert!(HeomBath::uniform(1.0, 1.0, 0.0).is_err());
        assert!(HeomBath::uniform(1.0, 1.0, -1.0).is_err());
    }
}

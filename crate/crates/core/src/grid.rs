use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Uniform output grid `t_k = k * dt`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, len: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return domain(format!("time step must be positive, got {dt}"));
        }
        if len < 2 {
            return domain("time grid needs at least two points");
        }
        Ok(TimeGrid { dt, len })
    }

    /// `points` samples spanning `[0, t_end]`.
    pub fn spanning(t_end: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return domain("time grid needs at least two points");
        }
        Self::new(t_end / (points - 1) as f64, points)
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.time(k)).collect()
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len - 1)
    }
}

//! Counting auxiliary density matrices: exact binomial count and the Stirling
//! estimate with rigorous bounds.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Number of auxiliary matrices for truncation depth `depth`, `k` exponential
/// terms per bath and `n` baths: `(depth + K N)! / (depth! (K N)!)`.
pub fn adm_count(depth: u64, k: u64, n: u64) -> BigUint {
    binomial(depth + k * n, depth)
}

/// Same count accumulated level by level: `sum_{m=0}^{depth} C(m + KN - 1, m)`.
pub fn adm_count_by_level(depth: u64, k: u64, n: u64) -> BigUint {
    let kn = k * n;
    if kn == 0 {
        return BigUint::one();
    }
    (0..=depth).map(|m| binomial(m + kn - 1, m)).sum()
}

pub fn binomial(n: u64, r: u64) -> BigUint {
    if r > n {
        return BigUint::ZERO;
    }
    let r = r.min(n - r);
    let mut acc = BigUint::one();
    for i in 0..r {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Natural log of a big integer.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap_or(f64::INFINITY);
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

/// Stirling estimate of the count and a bracket that provably contains it.
///
/// All values are natural logarithms so very large hierarchies do not overflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StirlingEstimate {
    pub ln_central: f64,
    pub ln_lower: f64,
    pub ln_upper: f64,
}

impl StirlingEstimate {
    pub fn central(&self) -> f64 {
        self.ln_central.exp()
    }

    pub fn lower(&self) -> f64 {
        self.ln_lower.exp()
    }

    pub fn upper(&self) -> f64 {
        self.ln_upper.exp()
    }

    pub fn contains_ln(&self, ln_value: f64) -> bool {
        self.ln_lower <= ln_value && ln_value <= self.ln_upper
    }
}

/// Stirling form of the count with remainders `1/(12m+1) < r_m < 1/(12m)`.
pub fn adm_count_stirling(depth: u64, k: u64, n: u64) -> Result<StirlingEstimate> {
    let kn = k * n;
    if depth == 0 || kn == 0 {
        return domain("Stirling estimate needs depth >= 1 and K N >= 1");
    }
    let a = depth as f64;
    let b = kn as f64;
    let base = 0.5 * ((1.0 / a + 1.0 / b) / (2.0 * std::f64::consts::PI)).ln()
        + a * (b / a).ln_1p()
        + b * (a / b).ln_1p();
    let r_lo = |m: f64| 1.0 / (12.0 * m + 1.0);
    let r_hi = |m: f64| 1.0 / (12.0 * m);
    let r_mid = |m: f64| 0.5 * (r_lo(m) + r_hi(m));
    let s = a + b;
    Ok(StirlingEstimate {
        ln_central: base + r_mid(s) - r_mid(a) - r_mid(b),
        ln_lower: base + r_lo(s) - r_hi(a) - r_hi(b),
        ln_upper: base + r_hi(s) - r_lo(a) - r_lo(b),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        assert_eq!(adm_count(4, 1, 4), BigUint::from(70u32));
        assert_eq!(adm_count(12, 1, 4), BigUint::from(1820u32));
        assert_eq!(adm_count(0, 3, 3), BigUint::one());
        assert_eq!(binomial(5, 7), BigUint::ZERO);
    }

    #[test]
    fn stirling_brackets_exact_value() {
        for &(d, k, n) in &[(1, 1, 1), (4, 1, 4), (10, 2, 3), (4, 49, 42), (30, 5, 20)] {
            let exact = ln_big(&adm_count(d, k, n));
            let s = adm_count_stirling(d, k, n).unwrap();
            assert!(s.contains_ln(exact), "({d},{k},{n}) {exact} not in [{}, {}]", s.ln_lower, s.ln_upper);
            assert!((s.ln_central - exact).abs() < 0.1);
        }
    }

    #[test]
    fn large_log() {
        let x = adm_count(2000, 50, 60);
        let direct = (1..=2000u64).map(|i| ((i + 3000) as f64 / i as f64).ln()).sum::<f64>();
        assert!((ln_big(&x) - direct).abs() / direct < 1e-12);
    }
}

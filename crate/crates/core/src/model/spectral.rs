use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, Result};

/// Bath spectral density J(w) in rad/s, defined for w >= 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SpectralDensity {
    /// J(w) = 2 lambda gamma w / (w^2 + gamma^2); lambda and gamma in rad/s.
    DrudeLorentz { lambda: f64, gamma: f64 },
    /// J(w) = lambda w / Gamma(s) (w / wc)^(s-1) exp(-w / wc); lambda dimensionless.
    PowerLaw { lambda: f64, s: f64, cutoff: f64 },
}

impl SpectralDensity {
    pub fn drude_lorentz(lambda: f64, gamma: f64) -> Result<Self> {
        let sd = SpectralDensity::DrudeLorentz { lambda, gamma };
        sd.validate()?;
        Ok(sd)
    }

    pub fn power_law(lambda: f64, s: f64, cutoff: f64) -> Result<Self> {
        let sd = SpectralDensity::PowerLaw { lambda, s, cutoff };
        sd.validate()?;
        Ok(sd)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralDensity::DrudeLorentz { lambda, gamma } => {
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return domain(format!("reorganisation energy must be >= 0, got {lambda}"));
                }
                if !(gamma.is_finite() && gamma > 0.0) {
                    return domain(format!("Drude cutoff must be > 0, got {gamma}"));
                }
            }
            SpectralDensity::PowerLaw { lambda, s, cutoff } => {
                if !(s.is_finite() && s > 0.0) {
                    return domain(format!("power-law exponent s must be > 0, got {s}"));
                }
                if !(lambda.is_finite() && lambda >= 0.0) {
                    return domain(format!("coupling strength must be >= 0, got {lambda}"));
                }
                if !(cutoff.is_finite() && cutoff > 0.0) {
                    return domain(format!("cutoff frequency must be > 0, got {cutoff}"));
                }
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, w: f64) -> Result<f64> {
        self.validate()?;
        if !(w >= 0.0) {
            return domain(format!("spectral density requires w >= 0, got {w}"));
        }
        Ok(self.eval_unchecked(w))
    }

    pub(crate) fn eval_unchecked(&self, w: f64) -> f64 {
        match *self {
            SpectralDensity::DrudeLorentz { lambda, gamma } => 2.0 * lambda * gamma * w / (w * w + gamma * gamma),
            SpectralDensity::PowerLaw { lambda, s, cutoff } => {
                if w == 0.0 {
                    return 0.0;
                }
                let x = w / cutoff;
                lambda * w / gamma(s) * x.powf(s - 1.0) * (-x).exp()
            }
        }
    }

    /// Limit of J(w)/w as w -> 0+ (infinite for sub-Ohmic densities).
    pub fn zero_frequency_slope(&self) -> f64 {
        match *self {
            SpectralDensity::DrudeLorentz { lambda, gamma } => 2.0 * lambda / gamma,
            SpectralDensity::PowerLaw { lambda, s, .. } => {
                if s < 1.0 {
                    f64::INFINITY
                } else if s == 1.0 {
                    lambda
                } else {
                    0.0
                }
            }
        }
    }

    /// Frequency at which J(w) is maximal.
    pub fn peak_frequency(&self) -> f64 {
        match *self {
            SpectralDensity::DrudeLorentz { gamma, .. } => gamma,
            SpectralDensity::PowerLaw { s, cutoff, .. } => s * cutoff,
        }
    }

    /// Characteristic cutoff (gamma or w_c).
    pub fn cutoff(&self) -> f64 {
        match *self {
            SpectralDensity::DrudeLorentz { gamma, .. } => gamma,
            SpectralDensity::PowerLaw { cutoff, .. } => cutoff,
        }
    }

    /// Integral of J(w)/w over (0, inf).
    pub fn integral_over_w(&self) -> f64 {
        match *self {
            SpectralDensity::DrudeLorentz { lambda, .. } => std::f64::consts::PI * lambda,
            SpectralDensity::PowerLaw { lambda, cutoff, .. } => lambda * cutoff,
        }
    }

    /// Rescales the frequency axis by `factor` (w -> w * factor), keeping the
    /// functional form: J'(w) = factor * J(w / factor).
    pub fn rescaled(&self, factor: f64) -> Self {
        match *self {
            SpectralDensity::DrudeLorentz { lambda, gamma } => SpectralDensity::DrudeLorentz {
                lambda: lambda * factor,
                gamma: gamma * factor,
            },
            SpectralDensity::PowerLaw { lambda, s, cutoff } => SpectralDensity::PowerLaw {
                lambda,
                s,
                cutoff: cutoff * factor,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = 0.5 * (f(a) + f(b));
        for k in 1..n {
            s += f(a + k as f64 * h);
        }
        s * h
    }

    #[test]
    fn drude_peaks_at_gamma() {
        let sd = SpectralDensity::drude_lorentz(2.0, 5.0).unwrap();
        let at = sd.evaluate(5.0).unwrap();
        assert!((at - 2.0).abs() < 1e-15);
        assert!(sd.evaluate(4.9).unwrap() < at && sd.evaluate(5.1).unwrap() < at);
    }

    #[test]
    fn power_law_peak_and_integral() {
        for &s in &[0.5, 1.0, 3.0] {
            let sd = SpectralDensity::power_law(0.05, s, 2.0).unwrap();
            let p = sd.peak_frequency();
            let at = sd.evaluate(p).unwrap();
            assert!(sd.evaluate(p * 0.98).unwrap() < at && sd.evaluate(p * 1.02).unwrap() < at);
            if s >= 1.0 {
                let num = trapezoid(|w| if w == 0.0 { sd.zero_frequency_slope() } else { sd.evaluate(w).unwrap() / w }, 0.0, 80.0, 200_000);
                assert!((num - sd.integral_over_w()).abs() / sd.integral_over_w() < 1e-6, "s={s}");
            }
        }
    }

    #[test]
    fn drude_integral() {
        let sd = SpectralDensity::drude_lorentz(1.5, 0.5).unwrap();
        let num = trapezoid(|w| if w == 0.0 { sd.zero_frequency_slope() } else { sd.evaluate(w).unwrap() / w }, 0.0, 4000.0, 4_000_000);
        assert!((num - sd.integral_over_w()).abs() / sd.integral_over_w() < 2e-4);
    }

    #[test]
    fn domain_checks() {
        assert!(SpectralDensity::power_law(0.1, 0.0, 1.0).is_err());
        assert!(SpectralDensity::power_law(0.1, -1.0, 1.0).is_err());
        assert!(SpectralDensity::drude_lorentz(1.0, 0.0).is_err());
        let sd = SpectralDensity::drude_lorentz(1.0, 1.0).unwrap();
        assert!(sd.evaluate(-1.0).is_err());
    }

    #[test]
    fn rescaling_commutes_with_evaluation() {
        let f = 1.0 / 3e9;
        for sd in [
            SpectralDensity::drude_lorentz(3.7e10, 9.4e11).unwrap(),
            SpectralDensity::power_law(0.05, 3.0, 7.5e11).unwrap(),
        ] {
            let r = sd.rescaled(f);
            for &w in &[1e9, 5e11, 2e12] {
                let lhs = r.evaluate(w * f).unwrap();
                let rhs = sd.evaluate(w).unwrap() * f;
                assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
            }
        }
    }
}

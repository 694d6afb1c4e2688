//! Physical constants (CODATA 2018) and unit conversions.
//!
//! Every frequency-like quantity inside the crate is an angular frequency in rad/s
//! with hbar = 1, so energies, couplings and rates share one unit.

use serde::{Deserialize, Serialize};

pub const HBAR: f64 = 1.054_571_817e-34;
pub const K_B: f64 = 1.380_649e-23;
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_8128e-12;
/// One debye in C m.
pub const DEBYE: f64 = 1e-21 / SPEED_OF_LIGHT;
pub const ANGSTROM: f64 = 1e-10;

/// Default ratio between the energy-transfer and NMR frequency scales.
pub const DEFAULT_SCALE_FACTOR: f64 = 3e9;

/// Wavenumber (cm^-1) to angular frequency (rad/s).
pub fn wavenumber_to_angular(cm: f64) -> f64 {
    cm * 100.0 * SPEED_OF_LIGHT * 2.0 * std::f64::consts::PI
}

pub fn angular_to_wavenumber(w: f64) -> f64 {
    w / (100.0 * SPEED_OF_LIGHT * 2.0 * std::f64::consts::PI)
}

pub fn hz(f: f64) -> f64 {
    2.0 * std::f64::consts::PI * f
}

pub fn to_hz(w: f64) -> f64 {
    w / (2.0 * std::f64::consts::PI)
}

/// Thermal frequency k_B T / hbar in rad/s.
pub fn thermal_rate(temperature_k: f64) -> f64 {
    K_B * temperature_k / HBAR
}

/// The two frequency scales the model is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Physical energy-transfer scale (optical frequencies, femtoseconds).
    Eet,
    /// Rescaled NMR scale (kHz frequencies, milliseconds).
    Nmr,
}

impl Frame {
    pub fn label(self) -> &'static str {
        match self {
            Frame::Eet => "eet",
            Frame::Nmr => "nmr",
        }
    }
}

/// Maps frequencies, temperatures and times between the two frames.
///
/// Frequencies and temperatures are divided by `scale` when going to the NMR
/// frame; times are multiplied by it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMap {
    pub scale: f64,
}

impl Default for FrameMap {
    fn default() -> Self {
        FrameMap {
            scale: DEFAULT_SCALE_FACTOR,
        }
    }
}

impl FrameMap {
    pub fn new(scale: f64) -> crate::Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return crate::error::domain(format!("scale factor must be positive, got {scale}"));
        }
        Ok(FrameMap { scale })
    }

    fn factor(&self, from: Frame, to: Frame) -> f64 {
        match (from, to) {
            (Frame::Eet, Frame::Nmr) => 1.0 / self.scale,
            (Frame::Nmr, Frame::Eet) => self.scale,
            _ => 1.0,
        }
    }

    pub fn frequency(&self, w: f64, from: Frame, to: Frame) -> f64 {
        w * self.factor(from, to)
    }

    pub fn temperature(&self, t: f64, from: Frame, to: Frame) -> f64 {
        t * self.factor(from, to)
    }

    pub fn time(&self, t: f64, from: Frame, to: Frame) -> f64 {
        t / self.factor(from, to)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn debye_value() {
        assert!((DEBYE - 3.335_640_951_981_52e-30).abs() < 1e-43);
    }

    #[test]
    fn wavenumber_round_trip() {
        let w = wavenumber_to_angular(13000.0);
        assert!((w - 2.448_747e15).abs() / w < 1e-6);
        assert!((angular_to_wavenumber(w) - 13000.0).abs() < 1e-9);
    }

    #[test]
    fn frame_round_trip() {
        let m = FrameMap::default();
        let w = 1.234e14;
        let back = m.frequency(m.frequency(w, Frame::Eet, Frame::Nmr), Frame::Nmr, Frame::Eet);
        assert!((back - w).abs() / w < 1e-15);
        assert!((m.temperature(3e5, Frame::Eet, Frame::Nmr) - 1e-4).abs() < 1e-18);
        assert!((m.time(1e-3, Frame::Nmr, Frame::Eet) - 1e-3 / 3e9).abs() < 1e-25);
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(FrameMap::new(0.0).is_err());
        assert!(FrameMap::new(f64::NAN).is_err());
    }
}

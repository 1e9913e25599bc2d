use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{invalid, Abcd, FrequencyGrid, NetworkError, TwoPortChain};

/// Uniform TEM transmission-line section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSection {
    /// Characteristic impedance (Ω).
    pub char_impedance: f64,
    /// Physical length (m).
    pub length: f64,
    /// Inductance per unit length (H/m).
    pub inductance_per_length: f64,
    /// Capacitance per unit length (F/m).
    pub capacitance_per_length: f64,
    /// Attenuation constant (Np/m).
    #[serde(default)]
    pub loss_per_length: f64,
}

impl LineSection {
    /// Lossless section from per-length L and C; Z₀ = √(L'/C').
    pub fn from_lc(inductance: f64, capacitance: f64, length: f64) -> Result<Self, NetworkError> {
        let s = Self {
            char_impedance: (inductance / capacitance).sqrt(),
            length,
            inductance_per_length: inductance,
            capacitance_per_length: capacitance,
            loss_per_length: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    /// Lossless section reaching impedance `z0` with the given per-length
    /// inductance; the capacitance is C' = L'/Z₀².
    pub fn from_impedance(z0: f64, inductance: f64, length: f64) -> Result<Self, NetworkError> {
        Self::from_lc(inductance, inductance / (z0 * z0), length)
    }

    pub fn with_loss(mut self, loss_per_length: f64) -> Self {
        self.loss_per_length = loss_per_length;
        self
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if !(self.length > 0.0) {
            return Err(invalid("length", format!("must be > 0, got {}", self.length)));
        }
        if !(self.inductance_per_length > 0.0) || !(self.capacitance_per_length > 0.0) {
            return Err(invalid("line", "per-length L and C must be > 0"));
        }
        if !(self.loss_per_length >= 0.0) {
            return Err(invalid("loss_per_length", "must be >= 0"));
        }
        let z = (self.inductance_per_length / self.capacitance_per_length).sqrt();
        if ((self.char_impedance - z) / z).abs() > 1e-9 {
            return Err(invalid(
                "char_impedance",
                format!("{} Ω disagrees with sqrt(L/C) = {} Ω", self.char_impedance, z),
            ));
        }
        Ok(())
    }

    pub fn phase_velocity(&self) -> f64 {
        1.0 / (self.inductance_per_length * self.capacitance_per_length).sqrt()
    }

    /// One-way propagation delay (s).
    pub fn delay(&self) -> f64 {
        self.length / self.phase_velocity()
    }

    /// Electrical length βℓ (rad) at `f`.
    pub fn electrical_length(&self, f: f64) -> f64 {
        2.0 * PI * f * self.delay()
    }

    pub fn abcd_at(&self, f: f64) -> Abcd {
        let gl = Complex64::new(
            self.loss_per_length * self.length,
            self.electrical_length(f),
        );
        let z0 = Complex64::new(self.char_impedance, 0.0);
        let (ch, sh) = (gl.cosh(), gl.sinh());
        Abcd::new(ch, z0 * sh, sh / z0, ch)
    }
}

/// ABCD matrices of `section` across the grid.
pub fn line_abcd(section: &LineSection, grid: &FrequencyGrid) -> TwoPortChain {
    TwoPortChain::from_fn(grid, |f| section.abcd_at(f))
}

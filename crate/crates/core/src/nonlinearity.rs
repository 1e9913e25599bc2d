//! Current-dependent kinetic inductance of a thin superconducting film and
//! the resulting three- and four-wave-mixing coefficients.
//!
//! The inductance per square follows the even power series
//!
//! ```text
//! L_k(I) = L_dc · [1 + (I/I*)² + (I/I*)⁴]
//! ```
//!
//! truncated at the quartic term ([`KINETIC_SERIES_ORDER`]). Splitting the
//! current into a dc bias and a pump, `I = I_dc + I_p`, gives the
//! coefficients
//!
//! ```text
//! ε = 2·I_dc / (I*² + I_dc²)     ξ = 1 / (I*² + I_dc²)
//! ```
//!
//! which set the strength of three-wave (ε) and four-wave (ξ) mixing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Highest power of `I/I*` kept in the inductance series.
pub const KINETIC_SERIES_ORDER: u32 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NonlinearityError {
    #[error("film parameter `{field}` must be strictly positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("critical current {i_critical} A must be below I* = {i_star} A")]
    CriticalAboveStar { i_critical: f64, i_star: f64 },
    #[error("|I| = {current} A is outside the series validity bound |I| < I* = {i_star} A")]
    SeriesRange { current: f64, i_star: f64 },
    #[error("|I_dc| = {i_dc} A must stay below the critical current {i_critical} A")]
    OperatingPoint { i_dc: f64, i_critical: f64 },
    #[error(
        "|I_dc| + |I_p| = {total} A must stay below the critical current {i_critical} A"
    )]
    BiasExceedsCritical { total: f64, i_critical: f64 },
}

/// Superconducting film and line parameters. All SI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilmSpec {
    /// Kinetic inductance per square at zero current (H/□).
    pub sheet_inductance: f64,
    /// Film thickness (m).
    pub thickness: f64,
    /// Width of the amplification line (m).
    pub line_width: f64,
    /// Nonlinearity current scale I* (A).
    pub i_star: f64,
    /// Critical current I_c (A).
    pub i_critical: f64,
}

impl FilmSpec {
    /// 10 nm NbTiN, 1 µm wide: 35 pH/□, I_c = 800 µA, I* = 2.8 mA.
    pub fn nbtin_10nm() -> Self {
        Self {
            sheet_inductance: 35e-12,
            thickness: 10e-9,
            line_width: 1e-6,
            i_star: 2.8e-3,
            i_critical: 800e-6,
        }
    }

    pub fn validate(&self) -> Result<(), NonlinearityError> {
        for (field, value) in [
            ("sheet_inductance", self.sheet_inductance),
            ("thickness", self.thickness),
            ("line_width", self.line_width),
            ("i_star", self.i_star),
            ("i_critical", self.i_critical),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(NonlinearityError::NonPositive { field, value });
            }
        }
        if self.i_critical >= self.i_star {
            return Err(NonlinearityError::CriticalAboveStar {
                i_critical: self.i_critical,
                i_star: self.i_star,
            });
        }
        Ok(())
    }

    /// Zero-current kinetic inductance per unit length of the line (H/m).
    pub fn inductance_per_length(&self) -> f64 {
        self.sheet_inductance / self.line_width
    }
}

/// DC bias and pump amplitude applied to the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasState {
    pub i_dc: f64,
    pub i_pump_amplitude: f64,
}

impl BiasState {
    pub fn validate(&self, film: &FilmSpec) -> Result<(), NonlinearityError> {
        let total = self.i_dc.abs() + self.i_pump_amplitude.abs();
        if total >= film.i_critical {
            return Err(NonlinearityError::BiasExceedsCritical {
                total,
                i_critical: film.i_critical,
            });
        }
        Ok(())
    }
}

/// Mixing coefficients ε (1/A) and ξ (1/A²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingCoefficients {
    pub epsilon: f64,
    pub xi: f64,
}

impl MixingCoefficients {
    /// Evaluate the coefficients for any dc bias, with no operating-point
    /// check. See [`mixing_coefficients`] for the checked form.
    pub fn from_bias(i_star: f64, i_dc: f64) -> Self {
        let denom = i_star * i_star + i_dc * i_dc;
        Self {
            epsilon: 2.0 * i_dc / denom,
            xi: 1.0 / denom,
        }
    }
}

/// Kinetic inductance per square at total current `i_total`.
pub fn kinetic_inductance(film: &FilmSpec, i_total: f64) -> Result<f64, NonlinearityError> {
    if !(i_total.abs() < film.i_star) {
        return Err(NonlinearityError::SeriesRange {
            current: i_total.abs(),
            i_star: film.i_star,
        });
    }
    let x2 = (i_total / film.i_star).powi(2);
    Ok(film.sheet_inductance * (1.0 + x2 + x2 * x2))
}

/// Analytic derivative dL_k/dI of the truncated series (H/□ per A).
pub fn kinetic_inductance_slope(film: &FilmSpec, i_total: f64) -> Result<f64, NonlinearityError> {
    kinetic_inductance(film, i_total)?;
    let s2 = film.i_star * film.i_star;
    Ok(film.sheet_inductance * (2.0 * i_total / s2 + 4.0 * i_total.powi(3) / (s2 * s2)))
}

/// Mixing coefficients at a dc bias the film can actually carry.
pub fn mixing_coefficients(
    film: &FilmSpec,
    i_dc: f64,
) -> Result<MixingCoefficients, NonlinearityError> {
    if !(i_dc.abs() < film.i_critical) {
        return Err(NonlinearityError::OperatingPoint {
            i_dc: i_dc.abs(),
            i_critical: film.i_critical,
        });
    }
    Ok(MixingCoefficients::from_bias(film.i_star, i_dc))
}

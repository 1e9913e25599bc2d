//! Symmetric coupled-line directional coupler.
//!
//! The sawtooth coupling section is reduced to a uniform coupled pair with
//! effective even/odd impedances and independent even/odd phase velocities.
//! Equal velocities give ideal directivity. Any velocity mismatch leaks
//! power into the isolated port.
//!
//! Port layout: line 1 runs 1 → 2, line 2 runs 3 → 4 with port 3 beside
//! port 1. Power injected at port 4 couples backwards onto line 1 and leaves
//! at port 2, so |S24| is the forward coupling seen by the amplifier, |S23|
//! the reverse coupling and |S21| the through path.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{abcd_to_sparams, invalid, line_abcd, FrequencyGrid, LineSection, NetworkError, NPortSParams};
use crate::units::amplitude_to_db;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerSpec {
    pub coupled_length: f64,
    pub even_impedance: f64,
    pub odd_impedance: f64,
    pub effective_phase_velocity_even: f64,
    pub effective_phase_velocity_odd: f64,
}

impl CouplerSpec {
    /// Matched coupler with coupling `coupling_db` (negative) at `f_center`,
    /// where the section is a quarter wave long for both modes.
    pub fn for_midband_coupling(coupling_db: f64, z_ref: f64, f_center: f64, length: f64) -> Self {
        let k = 10f64.powf(coupling_db / 20.0);
        let v = 4.0 * length * f_center;
        Self {
            coupled_length: length,
            even_impedance: z_ref * ((1.0 + k) / (1.0 - k)).sqrt(),
            odd_impedance: z_ref * ((1.0 - k) / (1.0 + k)).sqrt(),
            effective_phase_velocity_even: v,
            effective_phase_velocity_odd: v,
        }
    }

    /// −20 dB at 15 GHz over a 1500 µm section in a 50 Ω system.
    pub fn paper_device() -> Self {
        Self::for_midband_coupling(-20.0, 50.0, 15e9, 1500e-6)
    }

    /// Voltage coupling coefficient (Z0e − Z0o)/(Z0e + Z0o).
    pub fn coupling_coefficient(&self) -> f64 {
        (self.even_impedance - self.odd_impedance) / (self.even_impedance + self.odd_impedance)
    }

    fn check_positive(&self) -> Result<(), NetworkError> {
        for (field, v) in [
            ("coupled_length", self.coupled_length),
            ("even_impedance", self.even_impedance),
            ("odd_impedance", self.odd_impedance),
            ("effective_phase_velocity_even", self.effective_phase_velocity_even),
            ("effective_phase_velocity_odd", self.effective_phase_velocity_odd),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(field, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Design check: positive values, Z0e > Z0o and √(Z0e·Z0o) within 5 %
    /// of the system impedance.
    pub fn validate(&self, z_ref: f64) -> Result<(), NetworkError> {
        self.check_positive()?;
        if self.even_impedance <= self.odd_impedance {
            return Err(invalid("even_impedance", "must exceed the odd-mode impedance"));
        }
        let zm = (self.even_impedance * self.odd_impedance).sqrt();
        if ((zm - z_ref) / z_ref).abs() > 0.05 {
            return Err(invalid(
                "coupler",
                format!("sqrt(Z0e·Z0o) = {zm:.3} Ω is more than 5% from {z_ref} Ω"),
            ));
        }
        Ok(())
    }

    fn mode_line(&self, z: f64, v: f64) -> LineSection {
        // per-length L, C chosen so the mode has impedance z and velocity v
        LineSection {
            char_impedance: z,
            length: self.coupled_length,
            inductance_per_length: z / v,
            capacitance_per_length: 1.0 / (z * v),
            loss_per_length: 0.0,
        }
    }
}

/// 4-port S-parameters by even/odd-mode superposition.
pub fn coupler_sparams(
    spec: &CouplerSpec,
    grid: &FrequencyGrid,
    z_ref: f64,
) -> Result<NPortSParams, NetworkError> {
    spec.check_positive()?;
    let even = abcd_to_sparams(
        &line_abcd(&spec.mode_line(spec.even_impedance, spec.effective_phase_velocity_even), grid),
        z_ref,
    )?;
    let odd = abcd_to_sparams(
        &line_abcd(&spec.mode_line(spec.odd_impedance, spec.effective_phase_velocity_odd), grid),
        z_ref,
    )?;
    let mut mats = Vec::with_capacity(grid.len());
    for k in 0..grid.len() {
        let (ge, te) = (even.get(k, 0, 0), even.get(k, 1, 0));
        let (go, to) = (odd.get(k, 0, 0), odd.get(k, 1, 0));
        let refl = 0.5 * (ge + go);
        let thru = 0.5 * (te + to);
        let near = 0.5 * (ge - go);
        let far = 0.5 * (te - to);
        #[rustfmt::skip]
        let s: [Complex64; 16] = [
            refl, thru, near, far,
            thru, refl, far,  near,
            near, far,  refl, thru,
            far,  near, thru, refl,
        ];
        mats.push(DMatrix::from_row_slice(4, 4, &s));
    }
    NPortSParams::new(grid.clone(), z_ref, mats)
}

/// Coupler figures of merit at one frequency (dB).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplerPoint {
    pub frequency: f64,
    pub through_db: f64,
    pub forward_coupling_db: f64,
    pub reverse_coupling_db: f64,
    pub directivity_db: f64,
}

pub fn coupler_metrics(s: &NPortSParams) -> Result<Vec<CouplerPoint>, NetworkError> {
    if s.n_ports() != 4 {
        return Err(NetworkError::PortCount { expected: 4, actual: s.n_ports() });
    }
    Ok(s.grid()
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let fwd = amplitude_to_db(s.get(k, 1, 3).norm());
            let rev = amplitude_to_db(s.get(k, 1, 2).norm());
            CouplerPoint {
                frequency: f,
                through_db: amplitude_to_db(s.get(k, 1, 0).norm()),
                forward_coupling_db: fwd,
                reverse_coupling_db: rev,
                directivity_db: fwd - rev,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_mode_impedances() {
        let c = CouplerSpec::paper_device();
        assert!((c.coupling_coefficient() - 0.1).abs() < 1e-12);
        assert!((c.even_impedance - 55.277).abs() < 1e-3);
        assert!((c.odd_impedance - 45.227).abs() < 1e-3);
        assert!(c.validate(50.0).is_ok());
    }

    #[test]
    fn decoupled_lines() {
        let spec = CouplerSpec {
            even_impedance: 50.0,
            odd_impedance: 50.0,
            ..CouplerSpec::paper_device()
        };
        assert!(spec.validate(50.0).is_err());
        let grid = FrequencyGrid::linspace(1e9, 30e9, 59).unwrap();
        let s = coupler_sparams(&spec, &grid, 50.0).unwrap();
        for m in coupler_metrics(&s).unwrap() {
            assert_eq!(m.forward_coupling_db, f64::NEG_INFINITY);
            assert!(m.through_db.abs() < 1e-12);
        }
    }

    #[test]
    fn lossless_and_reciprocal() {
        let spec = CouplerSpec {
            effective_phase_velocity_odd: 0.93 * CouplerSpec::paper_device().effective_phase_velocity_even,
            ..CouplerSpec::paper_device()
        };
        let grid = FrequencyGrid::linspace(0.5e9, 40e9, 400).unwrap();
        let s = coupler_sparams(&spec, &grid, 50.0).unwrap();
        assert!(s.unitarity_error() < 1e-6);
        assert!(s.reciprocity_error() < 1e-8);
        assert!(s.max_magnitude() <= 1.0 + 1e-6);
    }

    #[test]
    fn midband_coupling_and_band() {
        let spec = CouplerSpec::paper_device();
        let grid = FrequencyGrid::linspace(10e9, 20e9, 101).unwrap();
        let m = coupler_metrics(&coupler_sparams(&spec, &grid, 50.0).unwrap()).unwrap();
        assert!((m[50].forward_coupling_db + 20.0).abs() < 1e-9);
        assert!(m.iter().all(|p| (p.forward_coupling_db + 20.0).abs() <= 5.0));
        assert!(m.iter().all(|p| p.directivity_db > 200.0));
    }

    #[test]
    fn velocity_mismatch_degrades_directivity() {
        let base = CouplerSpec::paper_device();
        let grid = FrequencyGrid::new(vec![15e9]).unwrap();
        let directivity = |ratio: f64| {
            let spec = CouplerSpec {
                effective_phase_velocity_odd: base.effective_phase_velocity_even * ratio,
                ..base
            };
            coupler_metrics(&coupler_sparams(&spec, &grid, 50.0).unwrap()).unwrap()[0].directivity_db
        };
        let d: Vec<f64> = [1.0, 0.99, 0.97, 0.94, 0.9, 0.85].iter().map(|&r| directivity(r)).collect();
        assert!(d[0] > 200.0);
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    }
}

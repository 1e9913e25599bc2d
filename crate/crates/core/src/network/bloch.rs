//! Bloch analysis of a periodic line from the ABCD matrix of one period.
//!
//! For a reciprocal cell of length Λ, cos(kΛ) = (A + D)/2. Where the half
//! trace leaves [−1, 1] the wave is evanescent (stopband); the phase is then
//! pinned at the band-edge multiple of π and the decay rate is reported as
//! an attenuation. Outside stopbands the phase is unwrapped continuously from
//! the lowest grid frequency, which is taken to lie in the first passband.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{NetworkError, TwoPortChain};
use crate::units::interp_linear;

/// Dispersion data at one frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochPoint {
    pub frequency: f64,
    /// Unwrapped Bloch wavenumber (rad/m).
    pub wavenumber: f64,
    /// Evanescent decay (Np/m); zero in lossless passbands.
    pub attenuation: f64,
    /// Real part of (A + D)/2.
    pub half_trace: f64,
    pub in_stopband: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stopband {
    pub lower: f64,
    pub upper: f64,
}

impl Stopband {
    pub fn center(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub period: f64,
    pub points: Vec<BlochPoint>,
}

impl Dispersion {
    pub fn frequencies(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.frequency).collect()
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.wavenumber).collect()
    }

    /// Interpolated half trace at `f`, or an error outside the grid.
    pub fn half_trace_at(&self, f: f64) -> Result<f64, NetworkError> {
        let fs = self.frequencies();
        if f < fs[0] || f > fs[fs.len() - 1] {
            return Err(NetworkError::OutsideGrid { frequency: f });
        }
        let ts: Vec<f64> = self.points.iter().map(|p| p.half_trace).collect();
        Ok(interp_linear(&fs, &ts, f))
    }

    pub fn is_stopband(&self, f: f64) -> Result<bool, NetworkError> {
        Ok(self.half_trace_at(f)?.abs() > 1.0)
    }

    /// Linearly interpolated Bloch wavenumber; errors inside stopbands.
    pub fn wavenumber_at(&self, f: f64) -> Result<f64, NetworkError> {
        if self.is_stopband(f)? {
            return Err(NetworkError::InStopband { frequency: f });
        }
        Ok(interp_linear(&self.frequencies(), &self.wavenumbers(), f))
    }

    /// Contiguous stopband intervals, edges interpolated where |t| = 1.
    pub fn stopbands(&self) -> Vec<Stopband> {
        let mut bands = Vec::new();
        let pts = &self.points;
        let edge = |a: &BlochPoint, b: &BlochPoint| {
            let (ea, eb) = (a.half_trace.abs() - 1.0, b.half_trace.abs() - 1.0);
            if (eb - ea).abs() < f64::MIN_POSITIVE {
                return 0.5 * (a.frequency + b.frequency);
            }
            a.frequency + (b.frequency - a.frequency) * (-ea) / (eb - ea)
        };
        let mut start: Option<f64> = None;
        for (i, p) in pts.iter().enumerate() {
            match (start, p.in_stopband) {
                (None, true) => {
                    start = Some(if i == 0 { p.frequency } else { edge(&pts[i - 1], p) });
                }
                (Some(lo), false) => {
                    bands.push(Stopband { lower: lo, upper: edge(&pts[i - 1], p) });
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(lo) = start {
            bands.push(Stopband { lower: lo, upper: pts[pts.len() - 1].frequency });
        }
        bands
    }
}

/// Bloch wavenumber and stopband flags for a periodic cell of length `period`.
pub fn bloch_dispersion(supercell: &TwoPortChain, period: f64) -> Result<Dispersion, NetworkError> {
    for (index, det) in supercell.determinants().into_iter().enumerate() {
        if (det - 1.0).norm() > 1e-6 {
            return Err(NetworkError::NotUnimodular { index, det: det.re });
        }
    }
    let freqs = supercell.grid().points();
    let mut points: Vec<BlochPoint> = Vec::with_capacity(freqs.len());
    for (k, m) in supercell.matrices().iter().enumerate() {
        let t = 0.5 * (m[(0, 0)] + m[(1, 1)]);
        let z: Complex64 = t.acos();
        let theta = z.re.clamp(0.0, PI);
        let phase = match k {
            0 => theta,
            _ => {
                let prev = points[k - 1].wavenumber * period;
                let slope = if k >= 2 {
                    let prev2 = points[k - 2].wavenumber * period;
                    (prev - prev2) / (freqs[k - 1] - freqs[k - 2])
                } else {
                    prev / freqs[k - 1]
                };
                let predicted = prev + slope.max(0.0) * (freqs[k] - freqs[k - 1]);
                unwrap_branch(theta, prev, predicted)
            }
        };
        points.push(BlochPoint {
            frequency: freqs[k],
            wavenumber: phase / period,
            attenuation: z.im.abs() / period,
            half_trace: t.re,
            in_stopband: t.re.abs() > 1.0,
        });
    }
    Ok(Dispersion { period, points })
}

/// Choose among 2mπ ± θ the value closest to `predicted` that does not step
/// backwards from `prev`.
fn unwrap_branch(theta: f64, prev: f64, predicted: f64) -> f64 {
    let m0 = (predicted / (2.0 * PI)).floor() as i64;
    let mut best = f64::NAN;
    let mut best_dist = f64::INFINITY;
    for m in (m0 - 1)..=(m0 + 2) {
        let base = 2.0 * PI * m as f64;
        for c in [base + theta, base - theta] {
            if c < prev - 1e-9 {
                continue;
            }
            let d = (c - predicted).abs();
            if d < best_dist {
                best_dist = d;
                best = c;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{line_abcd, supercell_chain, FrequencyGrid, LineSection, SupercellSpec};
    use crate::nonlinearity::FilmSpec;

    #[test]
    fn uniform_line_has_linear_dispersion() {
        let line = LineSection::from_impedance(50.0, 3.5e-5, 68e-6).unwrap();
        // coarse grid spanning several Brillouin zones
        let grid = FrequencyGrid::linspace(0.2e9, 60e9, 301).unwrap();
        let d = bloch_dispersion(&line_abcd(&line, &grid), 68e-6).unwrap();
        assert!(d.stopbands().is_empty());
        let v = line.phase_velocity();
        for p in &d.points {
            let k = 2.0 * PI * p.frequency / v;
            assert!((p.wavenumber - k).abs() / k < 1e-7, "{} vs {}", p.wavenumber, k);
            assert!(!p.in_stopband);
        }
    }

    #[test]
    fn non_unimodular_rejected() {
        let grid = FrequencyGrid::new(vec![1e9]).unwrap();
        let chain = TwoPortChain::series_impedance(&grid, |_| Complex64::new(1.0, 0.0));
        let scaled = TwoPortChain::new(grid, vec![chain.at(0) * Complex64::new(2.0, 0.0)]).unwrap();
        assert!(matches!(
            bloch_dispersion(&scaled, 1e-6),
            Err(NetworkError::NotUnimodular { .. })
        ));
    }

    #[test]
    fn long_wavelength_limit_uses_average_line() {
        let film = FilmSpec::nbtin_10nm();
        let spec = SupercellSpec::paper_device();
        let grid = FrequencyGrid::linspace(1e6, 2e9, 200).unwrap();
        let chains = supercell_chain(&spec, &film, &grid).unwrap();
        let d = bloch_dispersion(&chains.supercell, spec.supercell_length()).unwrap();
        let (u, l) = spec.sections(&film).unwrap();
        let (u, l) = (u.unwrap(), l.unwrap());
        let l_tot = u.inductance_per_length * u.length + l.inductance_per_length * l.length;
        let c_tot = u.capacitance_per_length * u.length + l.capacitance_per_length * l.length;
        let expect = (l_tot * c_tot).sqrt() / spec.supercell_length();
        let p = d.points[0];
        let slope = p.wavenumber / (2.0 * PI * p.frequency);
        assert!((slope - expect).abs() / expect < 1e-9);
    }

    #[test]
    fn cascaded_phase_is_n_times_single() {
        let film = FilmSpec::nbtin_10nm();
        let spec = SupercellSpec::paper_device();
        let grid = FrequencyGrid::linspace(0.5e9, 10e9, 96).unwrap();
        let chains = supercell_chain(&spec, &film, &grid).unwrap();
        let d = bloch_dispersion(&chains.supercell, spec.supercell_length()).unwrap();
        let n = 7u64;
        let stack = chains.supercell.power(n);
        for (p, m) in d.points.iter().zip(stack.matrices()) {
            let phase = n as f64 * p.wavenumber * spec.supercell_length();
            let half = 0.5 * (m[(0, 0)] + m[(1, 1)]).re;
            assert!((phase.cos() - half).abs() < 1e-8);
        }
    }

    #[test]
    fn stopband_phase_is_pinned_with_attenuation() {
        let film = FilmSpec::nbtin_10nm();
        let spec = SupercellSpec::paper_device();
        let grid = FrequencyGrid::linspace(1e8, 25e9, 2500).unwrap();
        let chains = supercell_chain(&spec, &film, &grid).unwrap();
        let d = bloch_dispersion(&chains.supercell, spec.supercell_length()).unwrap();
        let bands = d.stopbands();
        assert!(bands.len() >= 2);
        let inside: Vec<_> = d.points.iter().filter(|p| p.in_stopband).collect();
        assert!(inside.iter().all(|p| p.attenuation > 0.0));
        let first = bands[0];
        for p in d.points.iter().filter(|p| p.frequency > first.lower && p.frequency < first.upper) {
            assert!((p.wavenumber * spec.supercell_length() - PI).abs() < 1e-9);
        }
        let ks = d.wavenumbers();
        assert!(ks.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        assert!(matches!(
            d.wavenumber_at(first.center()),
            Err(NetworkError::InStopband { .. })
        ));
    }
}

//! Three-wave-mixing gain along the dispersion-engineered line.
//!
//! Pump, signal and idler current envelopes `A_p, A_s, A_i` (A, peak) obey
//!
//! ```text
//! dA_p/dx = i·k_p·ε/4 · A_s·A_i·e^{-iΔk·x} + i·k_p·ξ/8 · (|A_p|² + 2|A_s|² + 2|A_i|²)·A_p
//! dA_s/dx = i·k_s·ε/4 · A_p·A_i*·e^{+iΔk·x} + i·k_s·ξ/8 · (2|A_p|² + |A_s|² + 2|A_i|²)·A_s
//! dA_i/dx = i·k_i·ε/4 · A_p·A_s*·e^{+iΔk·x} + i·k_i·ξ/8 · (2|A_p|² + 2|A_s|² + |A_i|²)·A_i
//! ```
//!
//! with `Δk = k_p − k_s − k_i` taken from the Bloch wavenumbers of the biased
//! line and ε, ξ from [`crate::nonlinearity`]. The ξ terms (self and cross
//! phase modulation) can be switched off, and the pump can be held fixed
//! (undepleted). In the lossless case the fluxes `N_j = |A_j|²/k_j` obey
//! `N_p + N_s` and `N_s − N_i` constant.
//!
//! With the pump undepleted, no ξ terms and `Δk = 0`, the signal power gain is
//! `cosh²(g·L)` with `g = ε·|A_p|·√(k_s·k_i)/4`.

use std::io::{Read, Write};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{
    abcd_to_sparams, bias_tee_through, bloch_dispersion, cascade, coupler_sparams, line_abcd,
    sparams_to_abcd, BiasTeeSpec, CouplerSpec, DcTermination, Dispersion, FrequencyGrid, LineSection,
    NPortSParams, NetworkError, SupercellSpec, TwoPortChain,
};
use crate::nonlinearity::{
    kinetic_inductance, mixing_coefficients, BiasState, FilmSpec, MixingCoefficients, NonlinearityError,
};
use crate::ode::{integrate, Dopri5Options, OdeError, OdeStats};
use crate::units::{amplitude_to_db, dbm_to_watts, median, peak_current_to_power, power_to_db, power_to_peak_current, watts_to_dbm};

#[derive(Debug, Error)]
pub enum GainError {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Nonlinearity(#[from] NonlinearityError),
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("{frequency} Hz lies in a stopband of the medium")]
    InStopband { frequency: f64 },
    #[error("integration failed at signal {frequency} Hz: {source} ({stats:?})")]
    Integration {
        frequency: f64,
        source: OdeError,
        stats: Option<OdeStats>,
    },
    #[error("gain profile shape: {0}")]
    Shape(String),
    #[error("pump tuning: {0}")]
    Tuning(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> GainError {
    GainError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PumpSpec {
    pub frequency: f64,
    /// Peak pump current at the line input (A).
    pub current_amplitude: f64,
}

impl PumpSpec {
    /// Pump from available power in dBm, launched into a matched line of
    /// impedance `z0`.
    pub fn from_dbm(frequency: f64, dbm: f64, z0: f64) -> Self {
        Self {
            frequency,
            current_amplitude: power_to_peak_current(dbm_to_watts(dbm), z0),
        }
    }

    pub fn power_dbm(&self, z0: f64) -> f64 {
        watts_to_dbm(peak_current_to_power(self.current_amplitude, z0))
    }

    pub fn validate(&self, film: &FilmSpec, i_dc: f64) -> Result<(), GainError> {
        if !(self.frequency > 0.0) || !self.frequency.is_finite() {
            return Err(invalid("pump.frequency", format!("must be > 0, got {}", self.frequency)));
        }
        if !(self.current_amplitude >= 0.0) {
            return Err(invalid(
                "pump.current_amplitude",
                format!("must be >= 0, got {}", self.current_amplitude),
            ));
        }
        BiasState {
            i_dc,
            i_pump_amplitude: self.current_amplitude,
        }
        .validate(film)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmeOptions {
    pub undepleted_pump: bool,
    pub kerr: bool,
    pub rtol: f64,
    /// Input signal amplitude (A); small enough to stay linear by default.
    pub signal_amplitude: f64,
    /// Upper bound on the integrator step (m).
    pub max_step: f64,
}

impl Default for CmeOptions {
    fn default() -> Self {
        Self {
            undepleted_pump: false,
            kerr: true,
            rtol: 1e-8,
            signal_amplitude: 1e-9,
            max_step: f64::INFINITY,
        }
    }
}

/// Envelopes along the line, sampled once per supercell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmeSolution {
    pub positions: Vec<f64>,
    pub pump: Vec<Complex64>,
    pub signal: Vec<Complex64>,
    pub idler: Vec<Complex64>,
    /// `[k_p, k_s, k_i]` in rad/m.
    pub wavenumbers: [f64; 3],
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl CmeSolution {
    /// Signal power gain |A_s(L)/A_s(0)|² (linear).
    pub fn gain(&self) -> f64 {
        let n = self.signal.len() - 1;
        self.signal[n].norm_sqr() / self.signal[0].norm_sqr()
    }

    pub fn gain_db(&self) -> f64 {
        power_to_db(self.gain())
    }

    /// Gain at every output position.
    pub fn gain_along(&self) -> Vec<f64> {
        let s0 = self.signal[0].norm_sqr();
        self.signal.iter().map(|a| a.norm_sqr() / s0).collect()
    }

    /// Largest relative violation of the two flux invariants along the line.
    /// `N_p + N_s` is compared with its input value, `N_s − N_i` with the
    /// largest signal flux reached.
    pub fn manley_rowe_drift(&self) -> f64 {
        let [kp, ks, ki] = self.wavenumbers;
        let flux = |a: Complex64, k: f64| a.norm_sqr() / k;
        let ps0 = flux(self.pump[0], kp) + flux(self.signal[0], ks);
        let si0 = flux(self.signal[0], ks) - flux(self.idler[0], ki);
        let s_max = self.signal.iter().map(|a| flux(*a, ks)).fold(0.0, f64::max);
        let mut drift: f64 = 0.0;
        for j in 0..self.positions.len() {
            let ps = flux(self.pump[j], kp) + flux(self.signal[j], ks);
            let si = flux(self.signal[j], ks) - flux(self.idler[j], ki);
            if ps0 > 0.0 {
                drift = drift.max((ps - ps0).abs() / ps0);
            }
            if s_max > 0.0 {
                drift = drift.max((si - si0).abs() / s_max);
            }
        }
        drift
    }
}

/// Integrate the coupled-mode equations for fixed wavenumbers.
///
/// `length` is covered with `n_sections` equal output intervals.
#[allow(clippy::too_many_arguments)]
pub fn solve_cme(
    wavenumbers: [f64; 3],
    mixing: MixingCoefficients,
    pump_amplitude: f64,
    length: f64,
    n_sections: usize,
    options: &CmeOptions,
) -> Result<CmeSolution, OdeError> {
    let [kp, ks, ki] = wavenumbers;
    let dk = kp - ks - ki;
    let (eps, xi) = (mixing.epsilon, mixing.xi);
    let kerr = if options.kerr { 1.0 } else { 0.0 };
    let i = Complex64::new(0.0, 1.0);
    let rhs = |x: f64, y: &[Complex64], dy: &mut [Complex64]| {
        let (ap, a_s, ai) = (y[0], y[1], y[2]);
        let (np, ns, ni) = (ap.norm_sqr(), a_s.norm_sqr(), ai.norm_sqr());
        let ph = Complex64::from_polar(1.0, dk * x);
        dy[0] = if options.undepleted_pump {
            i * kp * xi / 8.0 * kerr * np * ap
        } else {
            i * kp * eps / 4.0 * a_s * ai * ph.conj() + i * kp * xi / 8.0 * kerr * (np + 2.0 * ns + 2.0 * ni) * ap
        };
        dy[1] = i * ks * eps / 4.0 * ap * ai.conj() * ph + i * ks * xi / 8.0 * kerr * (2.0 * np + ns + 2.0 * ni) * a_s;
        dy[2] = i * ki * eps / 4.0 * ap * a_s.conj() * ph + i * ki * xi / 8.0 * kerr * (2.0 * np + 2.0 * ns + ni) * ai;
    };
    let n = n_sections.max(1);
    let positions: Vec<f64> = (0..=n).map(|j| length * j as f64 / n as f64).collect();
    let y0 = [
        Complex64::new(pump_amplitude, 0.0),
        Complex64::new(options.signal_amplitude, 0.0),
        Complex64::new(0.0, 0.0),
    ];
    let opts = Dopri5Options {
        rtol: options.rtol,
        atol: options.rtol * options.signal_amplitude * 1e-3,
        h_max: options.max_step,
        ..Default::default()
    };
    let (ys, stats) = integrate(rhs, 0.0, &y0, &positions, &opts)?;
    Ok(CmeSolution {
        positions,
        pump: ys.iter().map(|y| y[0]).collect(),
        signal: ys.iter().map(|y| y[1]).collect(),
        idler: ys.iter().map(|y| y[2]).collect(),
        wavenumbers,
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
    })
}

/// Phase-matched, undepleted, Kerr-free gain coefficient g (1/m).
pub fn parametric_gain_coefficient(epsilon: f64, pump_amplitude: f64, k_s: f64, k_i: f64) -> f64 {
    epsilon * pump_amplitude * (k_s * k_i).sqrt() / 4.0
}

/// Supercell ABCD with the kinetic inductance raised by the dc bias. The
/// per-length capacitance keeps its unbiased design value.
pub fn biased_supercell(
    spec: &SupercellSpec,
    film: &FilmSpec,
    i_dc: f64,
    grid: &FrequencyGrid,
) -> Result<TwoPortChain, GainError> {
    let scale = kinetic_inductance(film, i_dc)? / film.sheet_inductance;
    let (unloaded, loaded) = spec.sections(film)?;
    let mut cell = TwoPortChain::identity(grid);
    for s in [unloaded, loaded].into_iter().flatten() {
        let biased = LineSection::from_lc(s.inductance_per_length * scale, s.capacitance_per_length, s.length)?
            .with_loss(s.loss_per_length);
        cell = cell.then(&line_abcd(&biased, grid))?;
    }
    Ok(cell)
}

/// Δk = k(f_p) − k(f_s) − k(f_p − f_s) from interpolated Bloch wavenumbers.
pub fn phase_mismatch(dispersion: &Dispersion, f_pump: f64, f_signal: f64) -> Result<f64, GainError> {
    if !(f_signal > 0.0 && f_signal < f_pump) {
        return Err(invalid(
            "f_signal",
            format!("must lie in (0, f_pump) = (0, {f_pump}), got {f_signal}"),
        ));
    }
    let k = |f: f64| -> Result<f64, GainError> {
        dispersion.wavenumber_at(f).map_err(|e| match e {
            NetworkError::InStopband { frequency } => GainError::InStopband { frequency },
            other => other.into(),
        })
    };
    Ok(k(f_pump)? - k(f_signal)? - k(f_pump - f_signal)?)
}

/// The biased medium with its dispersion tabulated once for a pump.
#[derive(Debug, Clone)]
pub struct GainModel {
    pub film: FilmSpec,
    pub supercell: SupercellSpec,
    pub i_dc: f64,
    pub mixing: MixingCoefficients,
    pub dispersion: Dispersion,
    pub options: CmeOptions,
}

/// Dispersion table density used by [`GainModel::new`].
pub const DISPERSION_POINTS: usize = 8001;

impl GainModel {
    /// Tabulate the Bloch wavenumber of the biased line up to `f_max`.
    pub fn new(
        film: FilmSpec,
        supercell: SupercellSpec,
        i_dc: f64,
        f_max: f64,
        options: CmeOptions,
    ) -> Result<Self, GainError> {
        film.validate()?;
        supercell.validate()?;
        if !(f_max > 0.0) || !f_max.is_finite() {
            return Err(invalid("f_max", "must be > 0"));
        }
        let mixing = mixing_coefficients(&film, i_dc)?;
        let n = DISPERSION_POINTS;
        let grid = FrequencyGrid::linspace(f_max / n as f64, f_max, n)?;
        let cell = biased_supercell(&supercell, &film, i_dc, &grid)?;
        let dispersion = bloch_dispersion(&cell, supercell.supercell_length())?;
        Ok(Self {
            film,
            supercell,
            i_dc,
            mixing,
            dispersion,
            options,
        })
    }

    /// Model sized for a pump: dispersion tabulated slightly past f_p.
    pub fn for_pump(
        film: FilmSpec,
        supercell: SupercellSpec,
        i_dc: f64,
        pump: &PumpSpec,
        options: CmeOptions,
    ) -> Result<Self, GainError> {
        pump.validate(&film, i_dc)?;
        Self::new(film, supercell, i_dc, pump.frequency * 1.05, options)
    }

    pub fn wavenumber(&self, f: f64) -> Result<f64, GainError> {
        self.dispersion.wavenumber_at(f).map_err(|e| match e {
            NetworkError::InStopband { frequency } => GainError::InStopband { frequency },
            other => other.into(),
        })
    }

    pub fn phase_mismatch(&self, f_pump: f64, f_signal: f64) -> Result<f64, GainError> {
        phase_mismatch(&self.dispersion, f_pump, f_signal)
    }

    /// Envelopes along the full medium for one signal frequency.
    pub fn solve_3wm(&self, pump: &PumpSpec, f_signal: f64) -> Result<CmeSolution, GainError> {
        pump.validate(&self.film, self.i_dc)?;
        if !(f_signal > 0.0 && f_signal < pump.frequency) {
            return Err(invalid(
                "f_signal",
                format!("must lie in (0, f_pump) = (0, {}), got {f_signal}", pump.frequency),
            ));
        }
        let k = [
            self.wavenumber(pump.frequency)?,
            self.wavenumber(f_signal)?,
            self.wavenumber(pump.frequency - f_signal)?,
        ];
        solve_cme(
            k,
            self.mixing,
            pump.current_amplitude,
            self.supercell.total_length(),
            self.supercell.n_supercells as usize,
            &self.options,
        )
        .map_err(|source| GainError::Integration {
            frequency: f_signal,
            source,
            stats: None,
        })
    }

    /// On/off gain (dB) per grid point; `None` where the signal or idler is
    /// outside the 3WM band or in a stopband.
    pub fn on_off_gain(&self, pump: &PumpSpec, grid: &FrequencyGrid) -> Result<Vec<Option<f64>>, GainError> {
        pump.validate(&self.film, self.i_dc)?;
        self.wavenumber(pump.frequency)?;
        grid.points()
            .par_iter()
            .map(|&f| {
                if !(f < pump.frequency) {
                    return Ok(None);
                }
                match self.solve_3wm(pump, f) {
                    Ok(sol) => Ok(Some(sol.gain_db())),
                    Err(GainError::InStopband { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect()
    }

    pub fn gain_profile(
        &self,
        pump: &PumpSpec,
        grid: &FrequencyGrid,
        off_transmission: &[f64],
    ) -> Result<GainProfile, GainError> {
        let on_off = self.on_off_gain(pump, grid)?;
        GainProfile::new(grid.clone(), on_off, off_transmission.to_vec())
    }

    /// Bisect the pump amplitude so the peak on/off gain over `grid` equals
    /// `target_db`.
    pub fn tune_pump_amplitude(
        &self,
        f_pump: f64,
        grid: &FrequencyGrid,
        target_db: f64,
    ) -> Result<PumpSpec, GainError> {
        let i_max = (self.film.i_critical - self.i_dc.abs()) * (1.0 - 1e-9);
        let peak = |amp: f64| -> Result<f64, GainError> {
            let pump = PumpSpec {
                frequency: f_pump,
                current_amplitude: amp,
            };
            let g = self.on_off_gain(&pump, grid)?;
            g.into_iter()
                .flatten()
                .reduce(f64::max)
                .ok_or_else(|| GainError::Tuning("no grid point lies in the 3WM band".into()))
        };
        if peak(i_max)? < target_db {
            return Err(GainError::Tuning(format!(
                "{target_db} dB is out of reach below the critical current"
            )));
        }
        let (mut lo, mut hi) = (0.0, i_max);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if peak(mid)? < target_db {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-6 * hi {
                break;
            }
        }
        Ok(PumpSpec {
            frequency: f_pump,
            current_amplitude: hi,
        })
    }
}

/// Gain per grid point. `true = on/off + off_transmission` in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainProfile {
    pub grid: FrequencyGrid,
    pub on_off_gain: Vec<Option<f64>>,
    pub off_transmission: Vec<f64>,
    pub true_gain: Vec<Option<f64>>,
}

impl GainProfile {
    pub fn new(
        grid: FrequencyGrid,
        on_off_gain: Vec<Option<f64>>,
        off_transmission: Vec<f64>,
    ) -> Result<Self, GainError> {
        if on_off_gain.len() != grid.len() || off_transmission.len() != grid.len() {
            return Err(invalid(
                "gain_profile",
                format!(
                    "{} grid points, {} gains, {} off-transmission values",
                    grid.len(),
                    on_off_gain.len(),
                    off_transmission.len()
                ),
            ));
        }
        if let Some(v) = off_transmission.iter().find(|v| !(**v <= 0.0)) {
            return Err(invalid("off_transmission", format!("must be <= 0 dB, got {v}")));
        }
        let true_gain = on_off_gain
            .iter()
            .zip(&off_transmission)
            .map(|(g, t)| g.map(|g| g + t))
            .collect();
        Ok(Self {
            grid,
            on_off_gain,
            off_transmission,
            true_gain,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub peak_true_gain: f64,
    pub peak_frequency: f64,
    pub lower_edge: f64,
    pub upper_edge: f64,
    pub width: f64,
    pub median_true_gain: f64,
    pub median_on_off_gain: f64,
    pub points_in_band: usize,
}

/// Widest contiguous interval with true gain ≥ peak − 3 dB. Edges are
/// interpolated linearly between grid points; medians use the grid points
/// inside the band.
pub fn bandwidth_3db(profile: &GainProfile) -> Result<BandSummary, GainError> {
    let f = profile.grid.points();
    let g = &profile.true_gain;
    let n = f.len();
    let (peak_idx, peak) = g
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold(None, |best: Option<(usize, f64)>, (i, v)| match best {
            Some((_, b)) if b >= v => best,
            _ => Some((i, v)),
        })
        .ok_or_else(|| GainError::Shape("no gain values".into()))?;
    let interior_peak = (1..n.saturating_sub(1)).any(|i| g[i] == Some(peak));
    if !interior_peak {
        return Err(GainError::Shape(format!(
            "peak {peak:.3} dB sits on the grid boundary at {} Hz",
            f[peak_idx]
        )));
    }
    let level = peak - 3.0;
    let above: Vec<bool> = g.iter().map(|v| v.is_some_and(|v| v >= level)).collect();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for i in 0..=n {
        let on = i < n && above[i];
        match (start, on) {
            (None, true) => start = Some(i),
            (Some(s), false) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    let edge = |inside: usize, outside: usize| -> f64 {
        match g[outside] {
            Some(v) => {
                let vi = g[inside].unwrap_or(level);
                f[inside] + (f[outside] - f[inside]) * (vi - level) / (vi - v)
            }
            None => f[inside],
        }
    };
    let bounds = |(a, b): (usize, usize)| {
        let lo = if a == 0 { f[0] } else { edge(a, a - 1) };
        let hi = if b == n - 1 { f[n - 1] } else { edge(b, b + 1) };
        (lo, hi)
    };
    let (a, b) = runs
        .iter()
        .copied()
        .max_by(|x, y| {
            let (wx, wy) = (bounds(*x), bounds(*y));
            (wx.1 - wx.0).total_cmp(&(wy.1 - wy.0)).then(y.0.cmp(&x.0))
        })
        .ok_or_else(|| GainError::Shape("empty band".into()))?;
    let (lo, hi) = bounds((a, b));
    let true_in: Vec<f64> = (a..=b).filter_map(|i| g[i]).collect();
    let on_off_in: Vec<f64> = (a..=b).filter_map(|i| profile.on_off_gain[i]).collect();
    Ok(BandSummary {
        peak_true_gain: peak,
        peak_frequency: f[peak_idx],
        lower_edge: lo,
        upper_edge: hi,
        width: hi - lo,
        median_true_gain: median(&true_in).unwrap_or(f64::NAN),
        median_on_off_gain: median(&on_off_in).unwrap_or(f64::NAN),
        points_in_band: b - a + 1,
    })
}

fn through_two_port(s: &NPortSParams, from: usize, to: usize) -> Result<NPortSParams, NetworkError> {
    let mats = s
        .matrices()
        .iter()
        .map(|m| {
            nalgebra::DMatrix::from_row_slice(2, 2, &[m[(from, from)], m[(from, to)], m[(to, from)], m[(to, to)]])
        })
        .collect();
    NPortSParams::new(s.grid().clone(), s.reference_impedance(), mats)
}

/// Floor applied to modeled transmission so exports stay finite.
pub const TRANSMISSION_FLOOR_DB: f64 = -300.0;

/// Pump-off transmission (dB) of input bias tee, coupler through path,
/// biased medium and output bias tee, cascaded as two-ports with the unused
/// ports matched and the dc branches terminated by `dc_termination`.
#[allow(clippy::too_many_arguments)]
pub fn modeled_off_transmission(
    film: &FilmSpec,
    supercell: &SupercellSpec,
    i_dc: f64,
    coupler: &CouplerSpec,
    bias_tee: &BiasTeeSpec,
    dc_termination: DcTermination,
    grid: &FrequencyGrid,
    z_ref: f64,
) -> Result<Vec<f64>, GainError> {
    let tee = sparams_to_abcd(&bias_tee_through(bias_tee, grid, z_ref, dc_termination)?)?;
    let coupler = sparams_to_abcd(&through_two_port(&coupler_sparams(coupler, grid, z_ref)?, 0, 1)?)?;
    let medium = biased_supercell(supercell, film, i_dc, grid)?.power(u64::from(supercell.n_supercells));
    let chain = cascade(&[tee.clone(), coupler, medium, tee])?;
    let s = abcd_to_sparams(&chain, z_ref)?;
    Ok((0..grid.len())
        .map(|k| {
            let db = amplitude_to_db(s.get(k, 1, 0).norm());
            if db.is_finite() {
                db.clamp(TRANSMISSION_FLOOR_DB, 0.0)
            } else {
                TRANSMISSION_FLOOR_DB
            }
        })
        .collect())
}

const GAIN_CSV_HEADER: [&str; 4] = ["frequency_hz", "on_off_db", "off_transmission_db", "true_gain_db"];

fn opt_field(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_gain_csv<W: Write>(profile: &GainProfile, w: W) -> Result<(), GainError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(GAIN_CSV_HEADER)?;
    for (k, f) in profile.grid.iter().enumerate() {
        wr.write_record([
            f.to_string(),
            opt_field(profile.on_off_gain[k]),
            profile.off_transmission[k].to_string(),
            opt_field(profile.true_gain[k]),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_gain_csv<R: Read>(r: R) -> Result<GainProfile, GainError> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(GAIN_CSV_HEADER) {
        return Err(GainError::Parse {
            line: 1,
            message: format!("expected header {}", GAIN_CSV_HEADER.join(",")),
        });
    }
    let (mut f, mut on, mut off) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(i + 2);
        let num = |s: &str| -> Result<f64, GainError> {
            s.trim().parse().map_err(|_| GainError::Parse {
                line,
                message: format!("`{s}` is not a number"),
            })
        };
        let opt = |s: &str| -> Result<Option<f64>, GainError> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        f.push(num(&rec[0])?);
        on.push(opt(&rec[1])?);
        off.push(num(&rec[2])?);
    }
    GainProfile::new(FrequencyGrid::new(f)?, on, off)
}

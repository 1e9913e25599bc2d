//! Project configuration (TOML) and its validation.

use std::path::{Path, PathBuf};

use kitwpa::calfit::{Bound, FitBounds};
use kitwpa::gain::CmeOptions;
use kitwpa::network::{BiasTeeSpec, CouplerSpec, DcTermination, FrequencyGrid, SupercellSpec};
use kitwpa::noisechain::{ChainElement, NoiseError, ReadoutChain, Spectrum};
use kitwpa::nonlinearity::FilmSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Shipped paper-defaults configuration.
pub const PAPER_TOML: &str = include_str!("../../../configs/paper.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default)]
    pub output: OutputConfig,
    pub film: FilmSpec,
    pub supercell: SupercellSpec,
    pub bias: BiasConfig,
    pub pump: PumpConfig,
    pub coupler: CouplerSpec,
    pub bias_tee: BiasTeeSpec,
    pub chain: ReadoutChain,
    pub grids: Grids,
    #[serde(default)]
    pub gain: GainConfig,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_z_ref")]
    pub reference_impedance: f64,
}

fn default_z_ref() -> f64 {
    50.0
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            reference_impedance: default_z_ref(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasConfig {
    pub i_dc: f64,
}

/// Pump frequency plus exactly one way of fixing its amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    pub frequency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_amplitude: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<f64>,
    /// Tune the amplitude so the peak on/off gain over the gain grid hits
    /// this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_gain_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn to_grid(&self) -> Result<FrequencyGrid, CliError> {
        FrequencyGrid::linspace(self.start, self.stop, self.points).map_err(|e| CliError::Validation(vec![e.to_string()]))
    }

    fn check(&self, name: &str, errs: &mut Vec<String>) {
        if !(self.start > 0.0) || !self.start.is_finite() {
            errs.push(format!("grids.{name}.start: must be > 0, got {}", self.start));
        }
        if !(self.stop > self.start) || !self.stop.is_finite() {
            errs.push(format!("grids.{name}.stop: must exceed start, got {}", self.stop));
        }
        if self.points < 2 {
            errs.push(format!("grids.{name}.points: need at least 2, got {}", self.points));
        }
    }
}

impl std::str::FromStr for GridSpec {
    type Err = String;

    /// `START:STOP:POINTS` in Hz.
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts.as_slice() else {
            return Err(format!("expected START:STOP:POINTS, got `{s}`"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number"));
        Ok(Self {
            start: num(a)?,
            stop: num(b)?,
            points: n.trim().parse().map_err(|_| format!("`{n}` is not a point count"))?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub design: GridSpec,
    pub gain: GridSpec,
    pub components: GridSpec,
    pub noise: GridSpec,
    pub synth: GridSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKeyword {
    Model,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKeyword {
    Chain,
}

/// Pump-off transmission used to turn on/off gain into true gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OffTransmission {
    /// Cascade of the modeled bias tees, coupler and medium.
    Model(ModelKeyword),
    /// Flat value in dB.
    Constant(f64),
    /// CSV with columns frequency_hz, transmission_db, interpolated.
    File { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    pub off_transmission: OffTransmission,
    pub dc_termination: DcTermination,
    pub undepleted_pump: bool,
    pub kerr: bool,
    pub rtol: f64,
}

impl Default for GainConfig {
    fn default() -> Self {
        let o = CmeOptions::default();
        Self {
            off_transmission: OffTransmission::Model(ModelKeyword::Model),
            dc_termination: DcTermination::Open,
            undepleted_pump: o.undepleted_pump,
            kerr: o.kerr,
            rtol: o.rtol,
        }
    }
}

impl GainConfig {
    pub fn cme_options(&self) -> CmeOptions {
        CmeOptions {
            undepleted_pump: self.undepleted_pump,
            kerr: self.kerr,
            rtol: self.rtol,
            ..CmeOptions::default()
        }
    }
}

/// A synthetic truth value: a number or `"chain"` to take it from the
/// readout chain model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Truth {
    Value(f64),
    Source(ChainKeyword),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub noise_fraction: f64,
    pub v_max: f64,
    pub points: usize,
    pub resolution_bandwidth: f64,
    pub temperature: f64,
    pub g_sys_db: Truth,
    pub asymmetry: Truth,
    pub n_ex: Truth,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            noise_fraction: 0.01,
            v_max: 600e-6,
            points: 25,
            resolution_bandwidth: 1e6,
            temperature: 0.05,
            g_sys_db: Truth::Source(ChainKeyword::Chain),
            asymmetry: Truth::Source(ChainKeyword::Chain),
            n_ex: Truth::Source(ChainKeyword::Chain),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub g_sys_bounds: [f64; 2],
    pub asymmetry_bounds: [f64; 2],
    pub n_ex_bounds: [f64; 2],
    /// Directory of sweep CSVs; defaults to `<out>/sweeps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<PathBuf>,
    /// Explicit band for the medians.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_hz: Option<[f64; 2]>,
    /// Gain CSV whose 3 dB band sets the medians' band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_profile: Option<PathBuf>,
}

impl Default for FitConfig {
    fn default() -> Self {
        let b = FitBounds::default();
        Self {
            g_sys_bounds: [b.g_sys.lo, b.g_sys.hi],
            asymmetry_bounds: [b.asymmetry.lo, b.asymmetry.hi],
            n_ex_bounds: [b.n_ex.lo, b.n_ex.hi],
            sweeps: None,
            band_hz: None,
            gain_profile: None,
        }
    }
}

impl FitConfig {
    pub fn bounds(&self) -> FitBounds {
        let b = |x: [f64; 2]| Bound::new(x[0], x[1]);
        FitBounds {
            g_sys: b(self.g_sys_bounds),
            asymmetry: b(self.asymmetry_bounds),
            n_ex: b(self.n_ex_bounds),
        }
    }
}

impl ProjectConfig {
    pub fn paper_defaults() -> Self {
        Self::from_toml_str(PAPER_TOML).expect("shipped config parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| {
            let at = e
                .span()
                .map(|s| {
                    let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}: ")
                })
                .unwrap_or_default();
            CliError::Validation(vec![format!("{at}{}", e.message())])
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CliError::Validation(v) => CliError::Validation(v.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
            other => other,
        })
    }

    /// Every failed field, one message each. Empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut pos = |field: &str, v: f64| {
            if !(v > 0.0) || !v.is_finite() {
                errs.push(format!("{field}: must be a finite value > 0, got {v}"));
            }
        };
        pos("output.reference_impedance", self.output.reference_impedance);
        let f = &self.film;
        pos("film.sheet_inductance", f.sheet_inductance);
        pos("film.thickness", f.thickness);
        pos("film.line_width", f.line_width);
        pos("film.i_star", f.i_star);
        pos("film.i_critical", f.i_critical);
        let s = &self.supercell;
        pos("supercell.unloaded_z0", s.unloaded_z0);
        pos("supercell.loaded_z0", s.loaded_z0);
        pos("supercell.unit_cell_length", s.unit_cell_length);
        let c = &self.coupler;
        pos("coupler.coupled_length", c.coupled_length);
        pos("coupler.even_impedance", c.even_impedance);
        pos("coupler.odd_impedance", c.odd_impedance);
        pos("coupler.effective_phase_velocity_even", c.effective_phase_velocity_even);
        pos("coupler.effective_phase_velocity_odd", c.effective_phase_velocity_odd);
        let t = &self.bias_tee;
        pos("bias_tee.series_capacitance", t.series_capacitance);
        pos("bias_tee.dc_branch_squares", t.dc_branch_squares);
        pos("bias_tee.dc_branch_width", t.dc_branch_width);
        pos("bias_tee.dc_branch_impedance", t.dc_branch_impedance);
        pos("bias_tee.sheet_inductance", t.sheet_inductance);
        pos("pump.frequency", self.pump.frequency);
        pos("gain.rtol", self.gain.rtol);
        pos("synth.v_max", self.synth.v_max);
        pos("synth.resolution_bandwidth", self.synth.resolution_bandwidth);

        if f.i_critical >= f.i_star {
            errs.push(format!("film.i_critical: must be below i_star ({} >= {})", f.i_critical, f.i_star));
        }
        if s.n_supercells == 0 {
            errs.push("supercell.n_supercells: medium has zero length (n_supercells = 0)".into());
        }
        if s.n_unloaded + s.n_loaded == 0 {
            errs.push("supercell.n_unloaded: a supercell needs at least one cell".into());
        }
        if !(s.loss_per_length >= 0.0) {
            errs.push(format!("supercell.loss_per_length: must be >= 0, got {}", s.loss_per_length));
        }
        if !self.bias.i_dc.is_finite() || self.bias.i_dc.abs() >= f.i_critical {
            errs.push(format!(
                "bias.i_dc: |i_dc| must be below i_critical ({} A), got {}",
                f.i_critical, self.bias.i_dc
            ));
        }
        if errs.iter().all(|e| !e.starts_with("coupler.")) {
            if let Err(e) = c.validate(self.output.reference_impedance) {
                errs.push(format!("coupler: {e}"));
            }
        }

        let p = &self.pump;
        let modes = [p.current_amplitude.is_some(), p.power_dbm.is_some(), p.target_gain_db.is_some()];
        if modes.iter().filter(|m| **m).count() != 1 {
            errs.push("pump: set exactly one of current_amplitude, power_dbm, target_gain_db".into());
        }
        if let Some(a) = p.current_amplitude {
            if !(a >= 0.0) || a.abs() + self.bias.i_dc.abs() >= f.i_critical {
                errs.push(format!(
                    "pump.current_amplitude: |i_dc| + amplitude must stay below i_critical, got {a}"
                ));
            }
        }
        if let Some(d) = p.power_dbm {
            if !d.is_finite() {
                errs.push(format!("pump.power_dbm: must be finite, got {d}"));
            }
        }
        if let Some(g) = p.target_gain_db {
            if !(g > 0.0) || !g.is_finite() {
                errs.push(format!("pump.target_gain_db: must be > 0, got {g}"));
            }
        }

        if let Err(e @ NoiseError::Structure(_)) = self.chain.validate() {
            errs.push(format!("chain: {e}"));
        }
        self.check_chain_fields(&mut errs);

        for (name, g) in [
            ("design", &self.grids.design),
            ("gain", &self.grids.gain),
            ("components", &self.grids.components),
            ("noise", &self.grids.noise),
            ("synth", &self.grids.synth),
        ] {
            g.check(name, &mut errs);
        }
        for (name, g) in [("noise", &self.grids.noise), ("synth", &self.grids.synth), ("gain", &self.grids.gain)] {
            if g.stop >= self.pump.frequency {
                errs.push(format!(
                    "grids.{name}.stop: signal frequencies must lie below the pump ({} Hz)",
                    self.pump.frequency
                ));
            }
        }

        if let OffTransmission::Constant(v) = self.gain.off_transmission {
            if !(v <= 0.0) {
                errs.push(format!("gain.off_transmission: must be <= 0 dB, got {v}"));
            }
        }

        let sy = &self.synth;
        if !(sy.noise_fraction >= 0.0) || !sy.noise_fraction.is_finite() {
            errs.push(format!("synth.noise_fraction: must be >= 0, got {}", sy.noise_fraction));
        }
        if sy.points < kitwpa::calfit::MIN_SWEEP_POINTS {
            errs.push(format!(
                "synth.points: need at least {}, got {}",
                kitwpa::calfit::MIN_SWEEP_POINTS,
                sy.points
            ));
        }
        if !(sy.temperature >= 0.0) {
            errs.push(format!("synth.temperature: must be >= 0, got {}", sy.temperature));
        }
        if let Truth::Value(v) = sy.g_sys_db {
            if !v.is_finite() {
                errs.push(format!("synth.g_sys_db: must be finite, got {v}"));
            }
        }
        if let Truth::Value(v) = sy.asymmetry {
            if !(v > 0.0) {
                errs.push(format!("synth.asymmetry: must be > 0, got {v}"));
            }
        }
        if let Truth::Value(v) = sy.n_ex {
            if !(v >= 0.0) {
                errs.push(format!("synth.n_ex: must be >= 0, got {v}"));
            }
        }

        let fit = &self.fit;
        for (name, b) in [
            ("g_sys_bounds", fit.g_sys_bounds),
            ("asymmetry_bounds", fit.asymmetry_bounds),
            ("n_ex_bounds", fit.n_ex_bounds),
        ] {
            if b[0].is_nan() || b[1].is_nan() || !(b[0] < b[1]) {
                errs.push(format!("fit.{name}: need lo < hi, got [{}, {}]", b[0], b[1]));
            }
        }
        if !(fit.g_sys_bounds[0] >= 0.0) {
            errs.push(format!("fit.g_sys_bounds: lower bound must be >= 0, got {}", fit.g_sys_bounds[0]));
        }
        if let Some([lo, hi]) = fit.band_hz {
            if !(lo < hi) {
                errs.push(format!("fit.band_hz: need lower < upper, got [{lo}, {hi}]"));
            }
        }
        if fit.band_hz.is_some() && fit.gain_profile.is_some() {
            errs.push("fit: set at most one of band_hz, gain_profile".into());
        }
        errs
    }

    fn check_chain_fields(&self, errs: &mut Vec<String>) {
        for (k, el) in self.chain.elements.iter().enumerate() {
            let name = format!("elements[{k}]");
            let check = |errs: &mut Vec<String>, field: &str, s: &Spectrum, ok: fn(f64) -> bool, rule: &str| {
                if let Err(e) = s.validate(&format!("chain.{name}.{field}"), ok, rule) {
                    errs.push(e.to_string());
                }
            };
            match el {
                ChainElement::Efficiency(e) => {
                    check(errs, "eta", &e.eta, |v| v > 0.0 && v <= 1.0, "must lie in (0, 1]");
                    if !(e.bath_temperature >= 0.0) {
                        errs.push(format!("chain.{name}.bath_temperature: must be >= 0, got {}", e.bath_temperature));
                    }
                }
                ChainElement::Amplifier(a) => {
                    check(errs, "gain", &a.gain, |v| v > 0.0, "must be > 0");
                    check(errs, "added_noise", &a.added_noise, |v| v >= 0.0, "must be >= 0");
                    check(
                        errs,
                        "internal_transmission",
                        &a.internal_transmission,
                        |v| v > 0.0 && v <= 1.0,
                        "must lie in (0, 1]",
                    );
                }
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let errs = self.problems();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(errs))
        }
    }
}

//! The batch commands. Each writes its files into the output directory and
//! returns a short human-readable summary.

use std::path::{Path, PathBuf};

use kitwpa::calfit::{fit_band, read_sweep, synthesize_sweep, write_sweep, BandFit, FitResult, SyntheticSpec};
use kitwpa::gain::{
    bandwidth_3db, biased_supercell, modeled_off_transmission, read_gain_csv, write_gain_csv, BandSummary, GainModel,
    GainProfile, PumpSpec,
};
use kitwpa::network::io::{write_sparams_csv, write_touchstone_file};
use kitwpa::network::{
    bias_tee_sparams, bloch_dispersion, coupler_metrics, coupler_sparams, dc_branch_resonances, highpass_corner,
    CouplerPoint, DcTermination, FrequencyGrid, LineSection, Stopband,
};
use kitwpa::noisechain::{chain_output, noise_budget, HIGH_GAIN_THRESHOLD_DB};
use kitwpa::units::{interp_linear, median, power_to_db};
use serde::{Deserialize, Serialize};

use crate::config::{GridSpec, OffTransmission, ProjectConfig, Truth};
use crate::error::CliError;
use crate::output::{read_csv, write_csv, write_json, PlotManifest};

/// Resolved inputs shared by all commands.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ProjectConfig,
    /// Base for relative paths inside the config file.
    pub config_dir: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub grid: Option<GridSpec>,
    pub asymmetry_bounds: Option<(f64, f64)>,
    pub sweeps: Option<PathBuf>,
}

impl Context {
    fn grid(&self, default: &GridSpec) -> Result<FrequencyGrid, CliError> {
        self.grid.as_ref().unwrap_or(default).to_grid()
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.config_dir.join(p)
        }
    }

    fn z_ref(&self) -> f64 {
        self.config.output.reference_impedance
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionReport {
    pub cells: u32,
    pub length_m: f64,
    pub inductance_per_length_h_per_m: f64,
    pub capacitance_per_length_f_per_m: f64,
    pub char_impedance_ohm: f64,
    pub phase_velocity_m_per_s: f64,
}

impl SectionReport {
    fn new(cells: u32, s: &LineSection) -> Self {
        Self {
            cells,
            length_m: s.length,
            inductance_per_length_h_per_m: s.inductance_per_length,
            capacitance_per_length_f_per_m: s.capacitance_per_length,
            char_impedance_ohm: s.char_impedance,
            phase_velocity_m_per_s: s.phase_velocity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub total_length_m: f64,
    pub supercell_length_m: f64,
    pub unit_cell_length_m: f64,
    pub cells_per_supercell: u32,
    pub n_supercells: u32,
    pub total_cells: u64,
    pub unloaded: Option<SectionReport>,
    pub loaded: Option<SectionReport>,
    /// Bias at which the dispersion and stopbands were evaluated.
    pub i_dc_a: f64,
    /// First two stopbands found on the design grid.
    pub stopbands: Vec<Stopband>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub frequency_hz: f64,
    pub wavenumber_rad_per_m: f64,
    pub attenuation_np_per_m: f64,
    pub half_trace: f64,
    pub in_stopband: bool,
}

pub fn design(ctx: &Context) -> Result<Report, CliError> {
    let c = &ctx.config;
    let s = &c.supercell;
    let (unloaded, loaded) = s.sections(&c.film)?;
    let grid = ctx.grid(&c.grids.design)?;
    let cell = biased_supercell(s, &c.film, c.bias.i_dc, &grid)?;
    let disp = bloch_dispersion(&cell, s.supercell_length())?;
    let report = DesignReport {
        total_length_m: s.total_length(),
        supercell_length_m: s.supercell_length(),
        unit_cell_length_m: s.unit_cell_length,
        cells_per_supercell: s.cells_per_supercell(),
        n_supercells: s.n_supercells,
        total_cells: u64::from(s.cells_per_supercell()) * u64::from(s.n_supercells),
        unloaded: unloaded.map(|x| SectionReport::new(s.n_unloaded, &x)),
        loaded: loaded.map(|x| SectionReport::new(s.n_loaded, &x)),
        i_dc_a: c.bias.i_dc,
        stopbands: disp.stopbands().into_iter().take(2).collect(),
    };
    let rows: Vec<DispersionRow> = disp
        .points
        .iter()
        .map(|p| DispersionRow {
            frequency_hz: p.frequency,
            wavenumber_rad_per_m: p.wavenumber,
            attenuation_np_per_m: p.attenuation,
            half_trace: p.half_trace,
            in_stopband: p.in_stopband,
        })
        .collect();
    ensure_dir(&ctx.out)?;
    let json = ctx.out.join("design.json");
    let csv = ctx.out.join("dispersion.csv");
    write_json(&json, &report)?;
    write_csv(&csv, &rows)?;
    let manifest = PlotManifest::new("design")
        .line(
            "dispersion",
            "Bloch wavenumber of the biased medium",
            "dispersion.csv",
            "frequency_hz",
            &["wavenumber_rad_per_m"],
            "Frequency (Hz)",
            "k (rad/m)",
        )
        .line(
            "attenuation",
            "Stopband attenuation",
            "dispersion.csv",
            "frequency_hz",
            &["attenuation_np_per_m"],
            "Frequency (Hz)",
            "Attenuation (Np/m)",
        )
        .write(&ctx.out)?;
    let mut summary = format!(
        "medium length {:.4} cm ({} supercells x {} cells of {} um)",
        report.total_length_m * 100.0,
        report.n_supercells,
        report.cells_per_supercell,
        report.unit_cell_length_m * 1e6
    );
    for (k, b) in report.stopbands.iter().enumerate() {
        summary.push_str(&format!(
            "\nstopband {}: {:.4} to {:.4} GHz",
            k + 1,
            b.lower / 1e9,
            b.upper / 1e9
        ));
    }
    Ok(Report {
        files: vec![json, csv, manifest],
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSummary {
    pub pump_frequency_hz: f64,
    pub pump_current_amplitude_a: f64,
    pub pump_power_dbm: f64,
    pub i_dc_a: f64,
    pub band: Option<BandSummary>,
    pub band_error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionRow {
    pub frequency_hz: f64,
    pub transmission_db: f64,
}

fn off_transmission(ctx: &Context, grid: &FrequencyGrid) -> Result<Vec<f64>, CliError> {
    let c = &ctx.config;
    Ok(match &c.gain.off_transmission {
        OffTransmission::Model(_) => modeled_off_transmission(
            &c.film,
            &c.supercell,
            c.bias.i_dc,
            &c.coupler,
            &c.bias_tee,
            c.gain.dc_termination,
            grid,
            ctx.z_ref(),
        )?,
        OffTransmission::Constant(v) => vec![*v; grid.len()],
        OffTransmission::File { file } => {
            let path = ctx.resolve(file);
            let rows: Vec<TransmissionRow> = read_csv(&path)?;
            if rows.is_empty() || rows.windows(2).any(|w| !(w[1].frequency_hz > w[0].frequency_hz)) {
                return Err(CliError::Validation(vec![format!(
                    "{}: needs increasing frequency_hz rows",
                    path.display()
                )]));
            }
            let xs: Vec<f64> = rows.iter().map(|r| r.frequency_hz).collect();
            let ys: Vec<f64> = rows.iter().map(|r| r.transmission_db).collect();
            grid.iter().map(|f| interp_linear(&xs, &ys, f)).collect()
        }
    })
}

/// Pump as configured, tuning the amplitude when a target gain is given.
pub fn resolve_pump(ctx: &Context, model: &GainModel, grid: &FrequencyGrid) -> Result<PumpSpec, CliError> {
    let p = &ctx.config.pump;
    let pump = match (p.current_amplitude, p.power_dbm, p.target_gain_db) {
        (Some(a), _, _) => PumpSpec {
            frequency: p.frequency,
            current_amplitude: a,
        },
        (_, Some(dbm), _) => PumpSpec::from_dbm(p.frequency, dbm, ctx.z_ref()),
        (_, _, Some(target)) => model.tune_pump_amplitude(p.frequency, grid, target)?,
        _ => return Err(CliError::Validation(vec!["pump: no amplitude given".into()])),
    };
    pump.validate(&ctx.config.film, ctx.config.bias.i_dc)?;
    Ok(pump)
}

pub fn gain(ctx: &Context) -> Result<Report, CliError> {
    let c = &ctx.config;
    let grid = ctx.grid(&c.grids.gain)?;
    let model = GainModel::new(
        c.film,
        c.supercell,
        c.bias.i_dc,
        c.pump.frequency * 1.05,
        c.gain.cme_options(),
    )?;
    let pump = resolve_pump(ctx, &model, &grid)?;
    let off = off_transmission(ctx, &grid)?;
    let profile = model.gain_profile(&pump, &grid, &off)?;
    let (band, band_error) = match bandwidth_3db(&profile) {
        Ok(b) => (Some(b), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let summary = GainSummary {
        pump_frequency_hz: pump.frequency,
        pump_current_amplitude_a: pump.current_amplitude,
        pump_power_dbm: pump.power_dbm(ctx.z_ref()),
        i_dc_a: c.bias.i_dc,
        band,
        band_error,
    };
    ensure_dir(&ctx.out)?;
    let csv = ctx.out.join("gain.csv");
    let mut buf = Vec::new();
    write_gain_csv(&profile, &mut buf)?;
    std::fs::write(&csv, buf).map_err(|e| CliError::Io(format!("{}: {e}", csv.display())))?;
    let json = ctx.out.join("gain_summary.json");
    write_json(&json, &summary)?;
    let manifest = PlotManifest::new("gain")
        .line(
            "gain",
            "On/off and true gain",
            "gain.csv",
            "frequency_hz",
            &["on_off_db", "true_gain_db", "off_transmission_db"],
            "Frequency (Hz)",
            "Gain (dB)",
        )
        .write(&ctx.out)?;
    let text = match &summary.band {
        Some(b) => format!(
            "pump {:.3} GHz at {:.2} dBm ({:.2} uA); peak true gain {:.2} dB at {:.3} GHz; \
             3 dB band {:.3} to {:.3} GHz ({:.3} GHz); median true gain {:.2} dB",
            pump.frequency / 1e9,
            summary.pump_power_dbm,
            pump.current_amplitude * 1e6,
            b.peak_true_gain,
            b.peak_frequency / 1e9,
            b.lower_edge / 1e9,
            b.upper_edge / 1e9,
            b.width / 1e9,
            b.median_true_gain
        ),
        None => format!(
            "pump {:.3} GHz at {:.2} dBm; no 3 dB band: {}",
            pump.frequency / 1e9,
            summary.pump_power_dbm,
            summary.band_error.as_deref().unwrap_or("")
        ),
    };
    Ok(Report {
        files: vec![csv, json, manifest],
        summary: text,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplerReport {
    pub coupling_coefficient: f64,
    pub center_frequency_hz: f64,
    pub midband_forward_coupling_db: f64,
    /// Absent when the coupler is ideal and the directivity is unbounded.
    pub midband_directivity_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasTeeReport {
    pub highpass_corner_hz: f64,
    pub branch_inductance_h: f64,
    pub branch_length_m: f64,
    pub resonances_open_hz: Vec<f64>,
    pub resonances_matched_hz: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsReport {
    pub coupler: CouplerReport,
    pub bias_tee: BiasTeeReport,
}

fn write_network(dir: &Path, stem: &str, s: &kitwpa::network::NPortSParams) -> Result<[PathBuf; 2], CliError> {
    let ts = dir.join(format!("{stem}.s{}p", s.n_ports()));
    write_touchstone_file(s, &ts)?;
    let csv = dir.join(format!("{stem}_sparams.csv"));
    let mut buf = Vec::new();
    write_sparams_csv(s, &mut buf)?;
    std::fs::write(&csv, buf).map_err(|e| CliError::Io(format!("{}: {e}", csv.display())))?;
    Ok([ts, csv])
}

pub fn components(ctx: &Context) -> Result<Report, CliError> {
    let c = &ctx.config;
    let z = ctx.z_ref();
    let grid = ctx.grid(&c.grids.components)?;
    let coupler = coupler_sparams(&c.coupler, &grid, z)?;
    let metrics: Vec<CouplerPoint> = coupler_metrics(&coupler)?;
    let f_center = c.coupler.effective_phase_velocity_even / (4.0 * c.coupler.coupled_length);
    let mid = coupler_metrics(&coupler_sparams(&c.coupler, &FrequencyGrid::new(vec![f_center])?, z)?)?[0];
    let tee = bias_tee_sparams(&c.bias_tee, &grid, z)?;
    let f_max = grid.last();
    let report = ComponentsReport {
        coupler: CouplerReport {
            coupling_coefficient: c.coupler.coupling_coefficient(),
            center_frequency_hz: f_center,
            midband_forward_coupling_db: mid.forward_coupling_db,
            midband_directivity_db: Some(mid.directivity_db).filter(|d| d.is_finite()),
        },
        bias_tee: BiasTeeReport {
            highpass_corner_hz: highpass_corner(c.bias_tee.series_capacitance, z),
            branch_inductance_h: c.bias_tee.total_inductance(),
            branch_length_m: c.bias_tee.branch_length(),
            resonances_open_hz: dc_branch_resonances(&c.bias_tee, f_max, DcTermination::Open, z)?,
            resonances_matched_hz: dc_branch_resonances(&c.bias_tee, f_max, DcTermination::Matched, z)?,
        },
    };
    ensure_dir(&ctx.out)?;
    let mut files = Vec::new();
    files.extend(write_network(&ctx.out, "coupler", &coupler)?);
    files.extend(write_network(&ctx.out, "bias_tee", &tee)?);
    let mcsv = ctx.out.join("coupler_metrics.csv");
    write_csv(&mcsv, &metrics)?;
    let json = ctx.out.join("components.json");
    write_json(&json, &report)?;
    let manifest = PlotManifest::new("components")
        .line(
            "coupler",
            "Coupler through, coupling and directivity",
            "coupler_metrics.csv",
            "frequency",
            &["through_db", "forward_coupling_db", "reverse_coupling_db", "directivity_db"],
            "Frequency (Hz)",
            "dB",
        )
        .line(
            "bias_tee",
            "Bias tee S-parameters (real/imaginary)",
            "bias_tee_sparams.csv",
            "frequency_hz",
            &["s21_re", "s21_im", "s31_re", "s31_im"],
            "Frequency (Hz)",
            "S",
        )
        .write(&ctx.out)?;
    files.extend([mcsv, json, manifest]);
    let fmt = |v: &[f64]| v.iter().take(4).map(|f| format!("{:.4}", f / 1e9)).collect::<Vec<_>>().join(", ");
    let summary = format!(
        "coupler: {:.3} dB forward coupling at {:.3} GHz\nbias tee: corner {:.3} MHz; dc-branch resonances (GHz) open [{}], matched [{}]",
        report.coupler.midband_forward_coupling_db,
        f_center / 1e9,
        report.bias_tee.highpass_corner_hz / 1e6,
        fmt(&report.bias_tee.resonances_open_hz),
        fmt(&report.bias_tee.resonances_matched_hz),
    );
    Ok(Report { files, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub frequency_hz: f64,
    pub idler_frequency_hz: f64,
    /// Vacuum half quantum at the input.
    pub input_vacuum: f64,
    pub excess_noise: f64,
    pub hemt_input_referred: f64,
    pub limit: f64,
    pub exact: f64,
    pub fsa_true_gain_db: f64,
    pub asymmetry: f64,
    pub limit_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetSummary {
    pub pump_frequency_hz: f64,
    pub threshold_db: f64,
    pub median_limit: Option<f64>,
    pub median_exact: Option<f64>,
    pub rows: Vec<BudgetRow>,
}

pub fn noise_budget_cmd(ctx: &Context) -> Result<Report, CliError> {
    let c = &ctx.config;
    let grid = ctx.grid(&c.grids.noise)?;
    let fp = c.pump.frequency;
    let budget = noise_budget(&c.chain, grid.points(), fp, HIGH_GAIN_THRESHOLD_DB)?;
    let rows: Vec<BudgetRow> = budget
        .iter()
        .map(|b| BudgetRow {
            frequency_hz: b.frequency,
            idler_frequency_hz: b.idler_frequency,
            input_vacuum: 0.5,
            excess_noise: b.excess_noise,
            hemt_input_referred: b.hemt_input_referred,
            limit: b.limit,
            exact: b.exact,
            fsa_true_gain_db: b.fsa_true_gain_db,
            asymmetry: b.asymmetry,
            limit_valid: b.limit_valid,
        })
        .collect();
    let limits: Vec<f64> = rows.iter().map(|r| r.limit).collect();
    let exacts: Vec<f64> = rows.iter().map(|r| r.exact).collect();
    let summary = BudgetSummary {
        pump_frequency_hz: fp,
        threshold_db: HIGH_GAIN_THRESHOLD_DB,
        median_limit: median(&limits),
        median_exact: median(&exacts),
        rows: rows.clone(),
    };
    ensure_dir(&ctx.out)?;
    let csv = ctx.out.join("noise_budget.csv");
    write_csv(&csv, &rows)?;
    let json = ctx.out.join("noise_budget.json");
    write_json(&json, &summary)?;
    let manifest = PlotManifest::new("noise-budget")
        .line(
            "budget",
            "Input-referred noise budget",
            "noise_budget.csv",
            "frequency_hz",
            &["input_vacuum", "excess_noise", "hemt_input_referred", "limit", "exact"],
            "Frequency (Hz)",
            "Noise (quanta)",
        )
        .write(&ctx.out)?;
    let text = format!(
        "median system noise {:.4} quanta (high-gain limit), {:.4} quanta (full cascade); \
         {} of {} points below the {} dB validity threshold",
        summary.median_limit.unwrap_or(f64::NAN),
        summary.median_exact.unwrap_or(f64::NAN),
        rows.iter().filter(|r| !r.limit_valid).count(),
        rows.len(),
        HIGH_GAIN_THRESHOLD_DB
    );
    Ok(Report {
        files: vec![csv, json, manifest],
        summary: text,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRow {
    pub file: String,
    pub frequency_hz: f64,
    pub idler_frequency_hz: f64,
    pub g_sys: f64,
    pub asymmetry: f64,
    pub n_ex: f64,
    pub n_sys: f64,
    pub seed: u64,
}

/// Independent per-point seed derived from the run seed (SplitMix64 step).
pub fn point_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sweeps_dir(ctx: &Context) -> PathBuf {
    match (&ctx.sweeps, &ctx.config.fit.sweeps) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => ctx.resolve(p),
        (None, None) => ctx.out.join("sweeps"),
    }
}

fn is_sweep_file(p: &Path) -> bool {
    p.file_name()
        .and_then(|n| n.to_str())
        .is_some_and(|n| n.starts_with("sweep_") && (n.ends_with(".csv") || n.ends_with(".json")))
}

pub fn synth(ctx: &Context) -> Result<Report, CliError> {
    let c = &ctx.config;
    let sy = &c.synth;
    let grid = ctx.grid(&c.grids.synth)?;
    let seed = ctx.seed.unwrap_or(sy.seed);
    let dir = ctx.out.join("sweeps");
    ensure_dir(&dir)?;
    // stale sweeps from an earlier, larger grid would be picked up by `fit`
    for entry in std::fs::read_dir(&dir)? {
        let p = entry?.path();
        if is_sweep_file(&p) {
            std::fs::remove_file(&p)?;
        }
    }
    let mut truth_rows = Vec::with_capacity(grid.len());
    let mut files = Vec::new();
    for (k, f) in grid.iter().enumerate() {
        let fi = c.pump.frequency - f;
        let chain = chain_output(&c.chain, 0.0, 0.0, f, fi)?;
        let g_sys = match sy.g_sys_db {
            Truth::Value(db) => 10f64.powf(db / 10.0),
            Truth::Source(_) => chain.system_gain,
        };
        let asymmetry = match sy.asymmetry {
            Truth::Value(v) => v,
            Truth::Source(_) => chain.asymmetry,
        };
        let n_ex = match sy.n_ex {
            Truth::Value(v) => v,
            Truth::Source(_) => chain.excess_noise,
        };
        let truth = kitwpa::calfit::FitParams { g_sys, asymmetry, n_ex };
        let point = point_seed(seed, k as u64);
        let mut spec = SyntheticSpec::symmetric(truth, sy.v_max, sy.points, sy.noise_fraction, point);
        spec.resolution_bandwidth = sy.resolution_bandwidth;
        let sweep = synthesize_sweep(&spec, f, fi, sy.temperature)?;
        let name = format!("sweep_{k:04}.csv");
        let path = dir.join(&name);
        write_sweep(&sweep, &path)?;
        files.push(path);
        truth_rows.push(TruthRow {
            file: name,
            frequency_hz: f,
            idler_frequency_hz: fi,
            g_sys,
            asymmetry,
            n_ex,
            n_sys: n_ex + 0.5,
            seed: point,
        });
    }
    let truth_csv = ctx.out.join("synth_truth.csv");
    write_csv(&truth_csv, &truth_rows)?;
    let manifest = PlotManifest::new("synth")
        .line(
            "sweep",
            "Synthetic SNTJ sweep (first frequency)",
            "sweeps/sweep_0000.csv",
            "voltage_v",
            &["power_w"],
            "SNTJ bias (V)",
            "Power (W)",
        )
        .line(
            "truth",
            "Synthetic truth",
            "synth_truth.csv",
            "frequency_hz",
            &["n_ex", "n_sys", "asymmetry"],
            "Frequency (Hz)",
            "quanta / ratio",
        )
        .write(&ctx.out)?;
    files.extend([truth_csv, manifest]);
    let summary = format!("{} sweeps written to {} (seed {seed})", grid.len(), dir.display());
    Ok(Report { files, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub frequency_hz: f64,
    pub in_band: bool,
    pub g_sys_db: Option<f64>,
    pub asymmetry: Option<f64>,
    pub n_ex: Option<f64>,
    pub n_sys: Option<f64>,
    pub sigma_g_sys: Option<f64>,
    pub sigma_asymmetry: Option<f64>,
    pub sigma_n_ex: Option<f64>,
    pub residual_rms_w: Option<f64>,
    pub at_bound: Option<bool>,
    pub error: Option<String>,
}

impl FitRow {
    fn new(frequency: f64, in_band: bool, r: Option<&FitResult>, error: Option<&String>) -> Self {
        let sigma = r.and_then(|r| r.sigma());
        Self {
            frequency_hz: frequency,
            in_band,
            g_sys_db: r.map(|r| r.g_sys_db),
            asymmetry: r.map(|r| r.asymmetry),
            n_ex: r.map(|r| r.n_ex),
            n_sys: r.map(|r| r.n_sys),
            sigma_g_sys: sigma.map(|s| s[0]),
            sigma_asymmetry: sigma.map(|s| s[1]),
            sigma_n_ex: sigma.map(|s| s[2]),
            residual_rms_w: r.map(|r| r.residual_rms),
            at_bound: r.map(|r| r.at_bound.g_sys || r.at_bound.asymmetry || r.at_bound.n_ex),
            error: error.cloned(),
        }
    }
}

/// Outcome of `fit`: the report plus the number of failed sweeps, which
/// makes the command exit non-zero.
pub fn fit(ctx: &Context) -> Result<(Report, usize), CliError> {
    let c = &ctx.config;
    let dir = sweeps_dir(ctx);
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|x| x == "csv"));
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Io(format!("{}: no sweep CSV files", dir.display())));
    }
    let sweeps = paths.iter().map(|p| read_sweep(p)).collect::<Result<Vec<_>, _>>()?;
    let mut bounds = c.fit.bounds();
    if let Some((lo, hi)) = ctx.asymmetry_bounds {
        bounds.asymmetry = kitwpa::calfit::Bound::new(lo, hi);
    }
    let (band, gain_profile): ((f64, f64), Option<GainProfile>) = match (&c.fit.band_hz, &c.fit.gain_profile) {
        (Some([lo, hi]), _) => ((*lo, *hi), None),
        (None, Some(p)) => {
            let path = ctx.resolve(p);
            let file = std::fs::File::open(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let profile = read_gain_csv(file).map_err(|e| match CliError::from(e) {
                CliError::Validation(v) => {
                    CliError::Validation(v.into_iter().map(|m| format!("{}: {m}", path.display())).collect())
                }
                other => other,
            })?;
            let b = bandwidth_3db(&profile)?;
            ((b.lower_edge, b.upper_edge), Some(profile))
        }
        (None, None) => {
            let lo = sweeps.iter().map(|s| s.frequency).fold(f64::INFINITY, f64::min);
            let hi = sweeps.iter().map(|s| s.frequency).fold(f64::NEG_INFINITY, f64::max);
            ((lo, hi), None)
        }
    };
    let result: BandFit = fit_band(&sweeps, &bounds, band, gain_profile.as_ref())?;
    let rows: Vec<FitRow> = result
        .points
        .iter()
        .map(|p| FitRow::new(p.frequency, p.in_band, p.result.as_ref(), p.error.as_ref()))
        .collect();
    ensure_dir(&ctx.out)?;
    let json = ctx.out.join("fit_results.json");
    write_json(&json, &result)?;
    let csv = ctx.out.join("fit_summary.csv");
    write_csv(&csv, &rows)?;
    let manifest = PlotManifest::new("fit")
        .line(
            "system_noise",
            "Extracted system noise",
            "fit_summary.csv",
            "frequency_hz",
            &["n_sys"],
            "Frequency (Hz)",
            "System noise (quanta)",
        )
        .line(
            "parameters",
            "Fitted gain and asymmetry",
            "fit_summary.csv",
            "frequency_hz",
            &["g_sys_db", "asymmetry"],
            "Frequency (Hz)",
            "dB / ratio",
        )
        .write(&ctx.out)?;
    let mut text = format!(
        "{} sweeps fitted, {} failed; band {:.4} to {:.4} GHz ({:.4} GHz); median system noise {} quanta over {} points",
        result.points.len() - result.failed,
        result.failed,
        band.0 / 1e9,
        band.1 / 1e9,
        (band.1 - band.0) / 1e9,
        result.median_n_sys.map_or("n/a".to_string(), |v| format!("{v:.4}")),
        result.fitted_in_band
    );
    if let Some(g) = result.median_true_gain {
        text.push_str(&format!("; median true gain {g:.2} dB"));
    }
    let g_note = result
        .points
        .iter()
        .filter_map(|p| p.result.as_ref())
        .map(|r| power_to_db(r.g_sys))
        .fold(f64::NAN, f64::max);
    if g_note.is_finite() {
        text.push_str(&format!("; max system gain {g_note:.2} dB"));
    }
    Ok((
        Report {
            files: vec![json, csv, manifest],
            summary: text,
        },
        result.failed,
    ))
}

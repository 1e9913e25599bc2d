//! Shot-noise-junction calibration: synthetic sweeps and bounded fits.
//!
//! The analyzer power at the signal frequency is modeled as
//!
//! ```text
//! P(V) = G_sys · (N(V, f_s) + r·N(V, f_i) + N_ex) · h·f_s·B
//! ```
//!
//! with `N` from [`sntj_noise`] and `B` the resolution bandwidth. The fit
//! runs Levenberg–Marquardt on internal variables that map onto the bounded
//! box, so every trial point is feasible. `G_sys` and a positively bounded
//! `r` are handled in log space; `N_ex` and any bound reaching zero or below
//! are handled linearly. Several starts are tried and the lowest cost wins.
//!
//! Setting the idler frequency equal to the signal frequency reproduces the
//! equal-input convention in which only `G_sys·(1 + r)` and `G_sys·N_ex` are
//! identifiable.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gain::GainProfile;
use crate::noisechain::sntj_noise;
use crate::units::{median, power_to_db, ELEMENTARY_CHARGE, PLANCK};

#[derive(Debug, Error)]
pub enum CalfitError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("no start converged: {}", summarize(.starts))]
    NoConvergence { starts: Vec<StartDiagnostic> },
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn summarize(starts: &[StartDiagnostic]) -> String {
    starts
        .iter()
        .map(|s| format!("{} ({})", s.label, s.message))
        .collect::<Vec<_>>()
        .join("; ")
}

fn invalid(field: &'static str, reason: impl Into<String>) -> CalfitError {
    CalfitError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitParams {
    /// System gain (linear).
    pub g_sys: f64,
    /// Signal-idler gain asymmetry G̃₁^i/G̃₁^s.
    pub asymmetry: f64,
    /// Excess noise (quanta).
    pub n_ex: f64,
}

impl FitParams {
    fn as_array(&self) -> [f64; 3] {
        [self.g_sys, self.asymmetry, self.n_ex]
    }

    fn from_array(p: [f64; 3]) -> Self {
        Self {
            g_sys: p[0],
            asymmetry: p[1],
            n_ex: p[2],
        }
    }
}

/// Analyzer power (W) at the signal frequency for SNTJ bias `v`.
pub fn model_output(p: &FitParams, v: f64, f_signal: f64, f_idler: f64, temperature: f64, rbw: f64) -> f64 {
    let n = sntj_noise(v, f_signal, temperature) + p.asymmetry * sntj_noise(v, f_idler, temperature) + p.n_ex;
    p.g_sys * n * PLANCK * f_signal * rbw
}

/// One zero-span noise sweep against SNTJ bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweep {
    pub frequency: f64,
    pub idler_frequency: f64,
    pub sntj_voltages: Vec<f64>,
    pub measured_output: Vec<f64>,
    pub resolution_bandwidth: f64,
    pub chain_temperature: f64,
}

/// Minimum number of bias points in a sweep.
pub const MIN_SWEEP_POINTS: usize = 7;

impl NoiseSweep {
    pub fn validate(&self) -> Result<(), CalfitError> {
        if self.sntj_voltages.len() != self.measured_output.len() {
            return Err(invalid(
                "sweep",
                format!(
                    "{} voltages but {} power readings",
                    self.sntj_voltages.len(),
                    self.measured_output.len()
                ),
            ));
        }
        if self.sntj_voltages.len() < MIN_SWEEP_POINTS {
            return Err(invalid(
                "sweep",
                format!("needs at least {MIN_SWEEP_POINTS} points, got {}", self.sntj_voltages.len()),
            ));
        }
        let has_neg = self.sntj_voltages.iter().any(|v| *v < 0.0);
        let has_pos = self.sntj_voltages.iter().any(|v| *v > 0.0);
        if !(has_neg && has_pos) {
            return Err(invalid("sntj_voltages", "must span both signs"));
        }
        if self.sntj_voltages.iter().chain(&self.measured_output).any(|x| !x.is_finite()) {
            return Err(invalid("sweep", "non-finite value"));
        }
        if !(self.resolution_bandwidth > 0.0) {
            return Err(invalid("resolution_bandwidth", "must be > 0"));
        }
        if !(self.frequency > 0.0) || !(self.idler_frequency > 0.0) {
            return Err(invalid("frequency", "signal and idler frequencies must be > 0"));
        }
        if !(self.chain_temperature >= 0.0) {
            return Err(invalid("chain_temperature", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub truth: FitParams,
    pub voltages: Vec<f64>,
    /// Standard deviation of the multiplicative Gaussian error.
    pub noise_fraction: f64,
    pub seed: u64,
    pub resolution_bandwidth: f64,
}

impl SyntheticSpec {
    /// `n` evenly spaced biases over ±`v_max`, 1 MHz bandwidth.
    pub fn symmetric(truth: FitParams, v_max: f64, n: usize, noise_fraction: f64, seed: u64) -> Self {
        let voltages = (0..n)
            .map(|i| -v_max + 2.0 * v_max * i as f64 / (n.max(2) - 1) as f64)
            .collect();
        Self {
            truth,
            voltages,
            noise_fraction,
            seed,
            resolution_bandwidth: 1e6,
        }
    }
}

/// Model curve with seeded multiplicative noise `P·(1 + σ·z)`.
pub fn synthesize_sweep(spec: &SyntheticSpec, f_signal: f64, f_idler: f64, temperature: f64) -> Result<NoiseSweep, CalfitError> {
    if !(spec.noise_fraction >= 0.0) {
        return Err(invalid("noise_fraction", "must be >= 0"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let measured_output = spec
        .voltages
        .iter()
        .map(|&v| {
            let p = model_output(&spec.truth, v, f_signal, f_idler, temperature, spec.resolution_bandwidth);
            let z: f64 = StandardNormal.sample(&mut rng);
            p * (1.0 + spec.noise_fraction * z)
        })
        .collect();
    let sweep = NoiseSweep {
        frequency: f_signal,
        idler_frequency: f_idler,
        sntj_voltages: spec.voltages.clone(),
        measured_output,
        resolution_bandwidth: spec.resolution_bandwidth,
        chain_temperature: temperature,
    };
    sweep.validate()?;
    Ok(sweep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

impl Bound {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub g_sys: Bound,
    pub asymmetry: Bound,
    pub n_ex: Bound,
}

impl Default for FitBounds {
    fn default() -> Self {
        Self {
            g_sys: Bound::new(0.0, f64::INFINITY),
            asymmetry: Bound::new(0.01, 100.0),
            n_ex: Bound::new(0.0, f64::INFINITY),
        }
    }
}

impl FitBounds {
    pub fn validate(&self) -> Result<(), CalfitError> {
        for (field, b) in [("g_sys", self.g_sys), ("asymmetry", self.asymmetry), ("n_ex", self.n_ex)] {
            if b.lo.is_nan() || b.hi.is_nan() || !(b.lo < b.hi) {
                return Err(invalid(field, format!("bounds need lo < hi, got [{}, {}]", b.lo, b.hi)));
            }
        }
        if self.g_sys.lo < 0.0 {
            return Err(invalid("g_sys", "lower bound must be >= 0"));
        }
        Ok(())
    }

    fn as_array(&self) -> [Bound; 3] {
        [self.g_sys, self.asymmetry, self.n_ex]
    }
}

/// Map between an unbounded internal variable and a bounded parameter.
#[derive(Debug, Clone, Copy)]
struct Transform {
    log: bool,
    lo: f64,
    hi: f64,
}

impl Transform {
    fn new(bound: Bound, log_allowed: bool) -> Self {
        let log = log_allowed && bound.lo >= 0.0;
        let (lo, hi) = if log {
            (bound.lo.ln(), bound.hi.ln())
        } else {
            (bound.lo, bound.hi)
        };
        Self { log, lo, hi }
    }

    /// Bounded value in the working space (log or linear) and its slope.
    fn inner(&self, u: f64) -> (f64, f64) {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (false, false) => (u, 1.0),
            (true, false) => {
                let s = (u * u + 1.0).sqrt();
                (self.lo - 1.0 + s, u / s)
            }
            (false, true) => {
                let s = (u * u + 1.0).sqrt();
                (self.hi + 1.0 - s, -u / s)
            }
            (true, true) => {
                let w = self.hi - self.lo;
                (self.lo + w * (u.sin() + 1.0) / 2.0, w * u.cos() / 2.0)
            }
        }
    }

    fn to_param(&self, u: f64) -> (f64, f64) {
        let (q, dq) = self.inner(u);
        if self.log {
            let p = q.exp();
            (p, p * dq)
        } else {
            (q, dq)
        }
    }

    /// Internal value for `p`, pulled slightly inside the box so the
    /// transform slope is nonzero.
    fn to_internal(&self, p: f64) -> f64 {
        let mut q = if self.log { p.max(f64::MIN_POSITIVE).ln() } else { p };
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (false, false) => q,
            (true, false) => {
                q = q.max(self.lo + 1e-3);
                ((q - self.lo + 1.0).powi(2) - 1.0).sqrt()
            }
            (false, true) => {
                q = q.min(self.hi - 1e-3);
                ((self.hi + 1.0 - q).powi(2) - 1.0).sqrt()
            }
            (true, true) => {
                let w = self.hi - self.lo;
                q = q.clamp(self.lo + 1e-4 * w, self.hi - 1e-4 * w);
                (2.0 * (q - self.lo) / w - 1.0).asin()
            }
        }
    }
}

/// Outcome of one multi-start run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartDiagnostic {
    pub label: String,
    pub initial: FitParams,
    pub result: FitParams,
    /// ½·Σ(residual / peak power)².
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtBound {
    pub g_sys: bool,
    pub asymmetry: bool,
    pub n_ex: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub frequency: f64,
    pub g_sys: f64,
    pub g_sys_db: f64,
    pub asymmetry: f64,
    pub n_ex: f64,
    /// n_ex + ½.
    pub n_sys: f64,
    /// RMS of the power residuals (W).
    pub residual_rms: f64,
    /// Gauss–Newton covariance of (g_sys, asymmetry, n_ex); `None` when
    /// the normal matrix is singular.
    pub covariance: Option<[[f64; 3]; 3]>,
    pub converged: bool,
    pub at_bound: AtBound,
    pub starts: Vec<StartDiagnostic>,
}

impl FitResult {
    pub fn params(&self) -> FitParams {
        FitParams {
            g_sys: self.g_sys,
            asymmetry: self.asymmetry,
            n_ex: self.n_ex,
        }
    }

    /// One-sigma uncertainties from the covariance diagonal.
    pub fn sigma(&self) -> Option<[f64; 3]> {
        self.covariance.map(|c| [0, 1, 2].map(|i| c[i][i].max(0.0).sqrt()))
    }
}

struct Problem<'a> {
    sweep: &'a NoiseSweep,
    n_s: Vec<f64>,
    n_i: Vec<f64>,
    quantum: f64,
    scale: f64,
    transforms: [Transform; 3],
}

impl<'a> Problem<'a> {
    fn new(sweep: &'a NoiseSweep, bounds: &FitBounds) -> Self {
        let t = sweep.chain_temperature;
        let n_s = sweep.sntj_voltages.iter().map(|&v| sntj_noise(v, sweep.frequency, t)).collect();
        let n_i = sweep.sntj_voltages.iter().map(|&v| sntj_noise(v, sweep.idler_frequency, t)).collect();
        let scale = sweep.measured_output.iter().fold(0.0f64, |m, p| m.max(p.abs()));
        let b = bounds.as_array();
        Self {
            sweep,
            n_s,
            n_i,
            quantum: PLANCK * sweep.frequency * sweep.resolution_bandwidth,
            scale: if scale > 0.0 { scale } else { 1.0 },
            transforms: [Transform::new(b[0], true), Transform::new(b[1], true), Transform::new(b[2], false)],
        }
    }

    fn params(&self, u: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
        let mut p = [0.0; 3];
        let mut dp = [0.0; 3];
        for k in 0..3 {
            (p[k], dp[k]) = self.transforms[k].to_param(u[k]);
        }
        (p, dp)
    }

    fn model(&self, p: &[f64; 3], j: usize) -> f64 {
        p[0] * (self.n_s[j] + p[1] * self.n_i[j] + p[2]) * self.quantum
    }

    /// Scaled residuals and their Jacobian with respect to the parameters.
    fn residuals(&self, p: &[f64; 3]) -> (Vec<f64>, Vec<[f64; 3]>) {
        let n = self.n_s.len();
        let mut r = Vec::with_capacity(n);
        let mut jac = Vec::with_capacity(n);
        for j in 0..n {
            let m = self.model(p, j);
            r.push((m - self.sweep.measured_output[j]) / self.scale);
            let q = self.quantum / self.scale;
            jac.push([
                (self.n_s[j] + p[1] * self.n_i[j] + p[2]) * q,
                p[0] * self.n_i[j] * q,
                p[0] * q,
            ]);
        }
        (r, jac)
    }

    fn cost_at(&self, u: &[f64; 3]) -> f64 {
        let (p, _) = self.params(u);
        0.5 * self.residuals(&p).0.iter().map(|x| x * x).sum::<f64>()
    }
}

const MAX_ITERATIONS: usize = 2000;

fn levenberg_marquardt(prob: &Problem, p0: [f64; 3], label: &str) -> StartDiagnostic {
    let mut u = [0, 1, 2].map(|k| prob.transforms[k].to_internal(p0[k]));
    let initial = FitParams::from_array(prob.params(&u).0);
    let mut cost = prob.cost_at(&u);
    let mut lambda = -1.0;
    let mut nu = 2.0;
    let mut converged = false;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (p, dp) = prob.params(&u);
        let (r, jp) = prob.residuals(&p);
        let mut a = Matrix3::<f64>::zeros();
        let mut g = Vector3::<f64>::zeros();
        for (rj, row) in r.iter().zip(&jp) {
            let ju = Vector3::new(row[0] * dp[0], row[1] * dp[1], row[2] * dp[2]);
            a += ju * ju.transpose();
            g += ju * *rj;
        }
        let diag = Vector3::new(a[(0, 0)], a[(1, 1)], a[(2, 2)]).map(|d| d.max(1e-300));
        let g_scaled = (0..3).map(|k| g[k].abs() / diag[k].sqrt()).fold(0.0, f64::max);
        if cost == 0.0 || g_scaled <= 1e-15 * (2.0 * cost).sqrt() {
            converged = true;
            message = "gradient below tolerance".into();
            break;
        }
        if lambda < 0.0 {
            lambda = 1e-3 * diag.max();
        }
        let mut step_taken = false;
        while !step_taken {
            let mut damped = a;
            for k in 0..3 {
                damped[(k, k)] += lambda * diag[k];
            }
            let delta = match damped.cholesky() {
                Some(ch) => ch.solve(&(-g)),
                None => {
                    lambda *= nu;
                    nu *= 2.0;
                    if lambda > 1e30 {
                        break;
                    }
                    continue;
                }
            };
            let trial = [u[0] + delta[0], u[1] + delta[1], u[2] + delta[2]];
            let new_cost = prob.cost_at(&trial);
            let predicted = -(delta.dot(&g) + 0.5 * delta.dot(&(a * delta)));
            if new_cost.is_finite() && new_cost < cost {
                let rho = (cost - new_cost) / predicted.max(1e-300);
                lambda *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                let small_step = (0..3).all(|k| delta[k].abs() <= 1e-13 * (u[k].abs() + 1e-13));
                let small_gain = cost - new_cost <= 1e-15 * cost;
                u = trial;
                cost = new_cost;
                step_taken = true;
                if small_step || small_gain {
                    converged = true;
                    message = if small_step { "step below tolerance" } else { "cost reduction below tolerance" }.into();
                }
            } else {
                lambda *= nu;
                nu *= 2.0;
                if lambda > 1e30 {
                    break;
                }
            }
        }
        if !step_taken {
            // no descent direction left at machine precision
            converged = true;
            message = "no further decrease possible".into();
            break;
        }
        if converged {
            break;
        }
    }
    StartDiagnostic {
        label: label.to_string(),
        initial,
        result: FitParams::from_array(prob.params(&u).0),
        cost,
        iterations,
        converged,
        message,
    }
}

/// Solve the 3×3 normal equations of P = q·(a·N_s + b·N_i + c), the
/// model's linear reparameterization.
fn linear_estimate(prob: &Problem) -> Option<[f64; 3]> {
    let mut a = Matrix3::<f64>::zeros();
    let mut rhs = Vector3::<f64>::zeros();
    for j in 0..prob.n_s.len() {
        let x = Vector3::new(prob.n_s[j], prob.n_i[j], 1.0) * prob.quantum / prob.scale;
        a += x * x.transpose();
        rhs += x * (prob.sweep.measured_output[j] / prob.scale);
    }
    let abc = a.lu().solve(&rhs)?;
    Some([abc[0], abc[1], abc[2]])
}

fn initial_guesses(prob: &Problem) -> Vec<(&'static str, [f64; 3])> {
    let s = prob.sweep;
    let q = prob.quantum;
    let mut guesses = Vec::new();

    // slope of P against |V| from the outer quarter of the sweep on each side
    let mut pts: Vec<(f64, f64)> = s.sntj_voltages.iter().map(|v| v.abs()).zip(s.measured_output.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let outer = &pts[pts.len() / 2..];
    let (mx, my) = outer.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let (mx, my) = (mx / outer.len() as f64, my / outer.len() as f64);
    let (sxy, sxx) = outer
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + (p.0 - mx) * (p.1 - my), acc.1 + (p.0 - mx).powi(2)));
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let p0 = pts[0].1;
    // P ≈ G·(e/2)·B·|V|·(1 + r·f_s/f_i) at large bias, r = 1
    let g_slope = slope / (0.5 * ELEMENTARY_CHARGE * s.resolution_bandwidth * (1.0 + s.frequency / s.idler_frequency));
    if g_slope > 0.0 {
        let n0 = sntj_noise(pts[0].0, s.frequency, s.chain_temperature)
            + sntj_noise(pts[0].0, s.idler_frequency, s.chain_temperature);
        guesses.push(("asymptote slope", [g_slope, 1.0, p0 / (g_slope * q) - n0]));
    }

    // r pinned at 1: linear fit of P on (N_s + N_i, 1)
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for j in 0..prob.n_s.len() {
        let x = (prob.n_s[j] + prob.n_i[j]) * q;
        let y = s.measured_output[j];
        a11 += x * x;
        a12 += x * q;
        a22 += q * q;
        b1 += x * y;
        b2 += q * y;
    }
    let det = a11 * a22 - a12 * a12;
    if det != 0.0 {
        let g = (b1 * a22 - b2 * a12) / det;
        let c = (a11 * b2 - a12 * b1) / det;
        if g > 0.0 {
            guesses.push(("flat asymmetry", [g, 1.0, c / g]));
        }
    }

    // offset-dominated start: most of the zero-bias power attributed to
    // noise added after the junction, weak idler
    let g_small = if g_slope > 0.0 { g_slope } else { p0 / q };
    guesses.push(("hemt only", [g_small, 0.1, (p0 / (g_small * q)).max(1.0)]));

    if let Some([a, b, c]) = linear_estimate(prob) {
        if a > 0.0 {
            guesses.push(("linear", [a, b / a, c / a]));
        }
    }
    guesses
}

fn covariance(prob: &Problem, p: &[f64; 3]) -> Option<[[f64; 3]; 3]> {
    let n = prob.n_s.len();
    let (r, jac) = prob.residuals(p);
    let dof = n.saturating_sub(3).max(1) as f64;
    let s2 = r.iter().map(|x| x * x).sum::<f64>() / dof * prob.scale * prob.scale;
    let mut a = Matrix3::<f64>::zeros();
    for row in &jac {
        let j = Vector3::new(row[0], row[1], row[2]) * prob.scale;
        a += j * j.transpose();
    }
    // equilibrate before inverting
    let d = Vector3::new(a[(0, 0)], a[(1, 1)], a[(2, 2)]).map(|x| if x > 0.0 { 1.0 / x.sqrt() } else { 1.0 });
    let scaled = Matrix3::from_fn(|i, j| a[(i, j)] * d[i] * d[j]);
    let inv = scaled.try_inverse()?;
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = s2 * inv[(i, j)] * d[i] * d[j];
        }
    }
    out.iter().flatten().all(|x| x.is_finite()).then_some(out)
}

fn near(x: f64, b: f64) -> bool {
    b.is_finite() && (x - b).abs() <= 1e-6 * b.abs().max(1e-6)
}

/// Bounded multi-start least-squares fit of one sweep.
pub fn fit_noise_sweep(sweep: &NoiseSweep, bounds: &FitBounds) -> Result<FitResult, CalfitError> {
    sweep.validate()?;
    bounds.validate()?;
    let prob = Problem::new(sweep, bounds);
    let starts: Vec<StartDiagnostic> = initial_guesses(&prob)
        .into_iter()
        .map(|(label, p0)| levenberg_marquardt(&prob, p0, label))
        .collect();
    let best = starts
        .iter()
        .filter(|s| s.converged && s.cost.is_finite())
        .min_by(|a, b| a.cost.total_cmp(&b.cost));
    let Some(best) = best else {
        return Err(CalfitError::NoConvergence { starts });
    };
    let b = bounds.as_array();
    let mut p = best.result.as_array();
    for k in 0..3 {
        p[k] = p[k].clamp(b[k].lo, b[k].hi);
    }
    let cov = covariance(&prob, &p);
    let n = sweep.measured_output.len() as f64;
    let rms = (prob.residuals(&p).0.iter().map(|x| x * x).sum::<f64>() / n).sqrt() * prob.scale;
    let at = |k: usize| near(p[k], b[k].lo) || near(p[k], b[k].hi);
    Ok(FitResult {
        frequency: sweep.frequency,
        g_sys: p[0],
        g_sys_db: power_to_db(p[0]),
        asymmetry: p[1],
        n_ex: p[2],
        n_sys: p[2] + 0.5,
        residual_rms: rms,
        covariance: cov,
        converged: true,
        at_bound: AtBound {
            g_sys: at(0),
            asymmetry: at(1),
            n_ex: at(2),
        },
        starts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub frequency: f64,
    pub in_band: bool,
    pub result: Option<FitResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandFit {
    pub band_lower: f64,
    pub band_upper: f64,
    pub points: Vec<BandPoint>,
    pub median_n_sys: Option<f64>,
    /// Median true gain (dB) of the supplied gain profile over the band.
    pub median_true_gain: Option<f64>,
    pub fitted_in_band: usize,
    pub failed: usize,
}

/// Fit every sweep and take medians over `[band_lower, band_upper]`.
/// Failed fits are kept with their error and left out of the medians.
pub fn fit_band(
    sweeps: &[NoiseSweep],
    bounds: &FitBounds,
    band: (f64, f64),
    gain: Option<&GainProfile>,
) -> Result<BandFit, CalfitError> {
    if sweeps.is_empty() {
        return Err(invalid("sweeps", "need at least one sweep"));
    }
    if !(band.0 <= band.1) {
        return Err(invalid("band", format!("lower edge {} above upper edge {}", band.0, band.1)));
    }
    bounds.validate()?;
    let inside = |f: f64| f >= band.0 && f <= band.1;
    let points: Vec<BandPoint> = sweeps
        .par_iter()
        .map(|s| {
            let (result, error) = match fit_noise_sweep(s, bounds) {
                Ok(r) => (Some(r), None),
                Err(e) => (None, Some(e.to_string())),
            };
            BandPoint {
                frequency: s.frequency,
                in_band: inside(s.frequency),
                result,
                error,
            }
        })
        .collect();
    let n_sys: Vec<f64> = points
        .iter()
        .filter(|p| p.in_band)
        .filter_map(|p| p.result.as_ref().map(|r| r.n_sys))
        .collect();
    let median_true_gain = gain.and_then(|g| {
        let vals: Vec<f64> = g
            .grid
            .iter()
            .zip(&g.true_gain)
            .filter(|(f, _)| inside(*f))
            .filter_map(|(_, v)| *v)
            .collect();
        median(&vals)
    });
    Ok(BandFit {
        band_lower: band.0,
        band_upper: band.1,
        median_n_sys: median(&n_sys),
        median_true_gain,
        fitted_in_band: n_sys.len(),
        failed: points.iter().filter(|p| p.result.is_none()).count(),
        points,
    })
}

/// Sidecar metadata stored next to a sweep CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub frequency_hz: f64,
    pub idler_frequency_hz: f64,
    pub rbw_hz: f64,
    pub temperature_k: f64,
}

const SWEEP_HEADER: [&str; 2] = ["voltage_v", "power_w"];

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_sweep_csv<W: Write>(sweep: &NoiseSweep, w: W) -> Result<(), CalfitError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(SWEEP_HEADER)?;
    for (v, p) in sweep.sntj_voltages.iter().zip(&sweep.measured_output) {
        wr.write_record([v.to_string(), p.to_string()])?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CalfitError + '_ {
    move |source| CalfitError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write `<path>` and its JSON sidecar.
pub fn write_sweep(sweep: &NoiseSweep, csv_path: &Path) -> Result<(), CalfitError> {
    let mut buf = Vec::new();
    write_sweep_csv(sweep, &mut buf)?;
    std::fs::write(csv_path, buf).map_err(io_err(csv_path))?;
    let meta = SweepMeta {
        frequency_hz: sweep.frequency,
        idler_frequency_hz: sweep.idler_frequency,
        rbw_hz: sweep.resolution_bandwidth,
        temperature_k: sweep.chain_temperature,
    };
    let side = sidecar_path(csv_path);
    let mut json = serde_json::to_string_pretty(&meta)?;
    json.push('\n');
    std::fs::write(&side, json).map_err(io_err(&side))?;
    Ok(())
}

/// Parse sweep CSV text; `path` only labels errors.
pub fn read_sweep_csv<R: Read>(r: R, meta: &SweepMeta, path: &Path) -> Result<NoiseSweep, CalfitError> {
    let parse = |line: usize, message: String| CalfitError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header = rd.headers().map_err(|e| parse(1, e.to_string()))?.clone();
    if header.iter().ne(SWEEP_HEADER) {
        return Err(parse(1, format!("expected header `{}`", SWEEP_HEADER.join(","))));
    }
    let (mut vs, mut ps) = (Vec::new(), Vec::new());
    for (i, rec) in rd.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse(e.position().map_or(line, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(line, |p| p.line() as usize);
        if rec.len() != 2 {
            return Err(parse(line, format!("expected 2 fields, found {}", rec.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse(line, format!("`{s}` is not a number")));
        vs.push(num(&rec[0])?);
        ps.push(num(&rec[1])?);
    }
    let sweep = NoiseSweep {
        frequency: meta.frequency_hz,
        idler_frequency: meta.idler_frequency_hz,
        sntj_voltages: vs,
        measured_output: ps,
        resolution_bandwidth: meta.rbw_hz,
        chain_temperature: meta.temperature_k,
    };
    sweep.validate()?;
    Ok(sweep)
}

/// Read a sweep CSV and its sidecar (`.json` next to it).
pub fn read_sweep(csv_path: &Path) -> Result<NoiseSweep, CalfitError> {
    let side = sidecar_path(csv_path);
    let meta_text = std::fs::read_to_string(&side).map_err(io_err(&side))?;
    let meta: SweepMeta = serde_json::from_str(&meta_text).map_err(|e| CalfitError::Parse {
        path: side.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let file = std::fs::File::open(csv_path).map_err(io_err(csv_path))?;
    read_sweep_csv(file, &meta, csv_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn truth() -> FitParams {
        FitParams {
            g_sys: 1e9,
            asymmetry: 1.2,
            n_ex: 2.9,
        }
    }

    #[test]
    fn zero_bias_vacuum_output() {
        let p = FitParams {
            g_sys: 1e8,
            asymmetry: 1.0,
            n_ex: 0.0,
        };
        let out = model_output(&p, 0.0, 6e9, 4e9, 0.0, 1e6);
        let expect = 1e8 * PLANCK * 6e9 * 1e6;
        assert!((out - expect).abs() / expect < 1e-14);
    }

    #[test]
    fn large_bias_slope() {
        let p = truth();
        let slope = |fi: f64| {
            let (v1, v2) = (2e-3, 3e-3);
            (model_output(&p, v2, 6e9, fi, 0.0, 1e6) - model_output(&p, v1, 6e9, fi, 0.0, 1e6)) / (v2 - v1)
        };
        let equal = p.g_sys * (1.0 + p.asymmetry) * ELEMENTARY_CHARGE / 2.0 * 1e6;
        assert!((slope(6e9) - equal).abs() / equal < 1e-12);
        let general = p.g_sys * (1.0 + p.asymmetry * 6.0 / 4.0) * ELEMENTARY_CHARGE / 2.0 * 1e6;
        assert!((slope(4e9) - general).abs() / general < 1e-12);
    }

    #[test]
    fn output_scales_with_bandwidth() {
        let p = truth();
        let a = model_output(&p, 1e-4, 6e9, 4e9, 0.05, 1e6);
        let b = model_output(&p, 1e-4, 6e9, 4e9, 0.05, 2e6);
        assert_eq!(b, 2.0 * a);
    }

    #[test]
    fn synthesis_is_deterministic() {
        let spec = SyntheticSpec::symmetric(truth(), 600e-6, 25, 0.01, 7);
        let a = synthesize_sweep(&spec, 6e9, 4e9, 0.05).unwrap();
        let b = synthesize_sweep(&spec, 6e9, 4e9, 0.05).unwrap();
        assert_eq!(a, b);
        let clean = synthesize_sweep(&SyntheticSpec { noise_fraction: 0.0, ..spec }, 6e9, 4e9, 0.05).unwrap();
        for (v, p) in clean.sntj_voltages.iter().zip(&clean.measured_output) {
            assert_eq!(*p, model_output(&truth(), *v, 6e9, 4e9, 0.05, 1e6));
        }
        assert_ne!(a.measured_output, clean.measured_output);
    }

    #[test]
    fn noiseless_fit_recovers_truth() {
        let spec = SyntheticSpec::symmetric(truth(), 600e-6, 25, 0.0, 1);
        let sweep = synthesize_sweep(&spec, 6e9, 4e9, 0.05).unwrap();
        let fit = fit_noise_sweep(&sweep, &FitBounds::default()).unwrap();
        let t = truth();
        assert!((fit.g_sys - t.g_sys).abs() / t.g_sys < 1e-6);
        assert!((fit.asymmetry - t.asymmetry).abs() / t.asymmetry < 1e-6);
        assert!((fit.n_ex - t.n_ex).abs() / t.n_ex < 1e-6);
        let peak = sweep.measured_output.iter().fold(0.0f64, |m, p| m.max(*p));
        assert!(fit.residual_rms < 1e-8 * peak);
        assert!(fit.starts.len() >= 3);
        assert_eq!(fit.n_sys, fit.n_ex + 0.5);
    }

    #[test]
    fn fit_respects_bounds() {
        let spec = SyntheticSpec::symmetric(truth(), 600e-6, 25, 0.0, 1);
        let sweep = synthesize_sweep(&spec, 6e9, 4e9, 0.05).unwrap();
        let bounds = FitBounds {
            asymmetry: Bound::new(0.01, 1.0),
            ..Default::default()
        };
        let fit = fit_noise_sweep(&sweep, &bounds).unwrap();
        assert!(fit.asymmetry <= 1.0 && fit.asymmetry >= 0.01);
        assert!(fit.at_bound.asymmetry);
        assert!(!fit.at_bound.g_sys);
    }

    #[test]
    fn transforms_stay_inside() {
        for (b, log) in [
            (Bound::new(0.01, 100.0), true),
            (Bound::new(0.0, f64::INFINITY), true),
            (Bound::new(0.0, f64::INFINITY), false),
            (Bound::new(-2.0, 100.0), true),
            (Bound::new(f64::NEG_INFINITY, 3.0), false),
        ] {
            let t = Transform::new(b, log);
            for u in [-1e3, -3.0, -0.5, 0.0, 0.7, 2.0, 40.0] {
                let (p, _) = t.to_param(u);
                assert!(p >= b.lo - 1e-12 * b.lo.abs() && p <= b.hi + 1e-12 * b.hi.abs(), "{b:?} {u} {p}");
            }
            let x = if b.hi.is_finite() { 0.5 * (b.lo.max(0.0) + b.hi) } else { b.lo + 5.0 };
            let x = if b.lo.is_finite() { x } else { b.hi - 1.0 };
            let back = t.to_param(t.to_internal(x)).0;
            assert!((back - x).abs() < 1e-9 * x.abs().max(1.0), "{b:?} {x} {back}");
        }
    }

    #[test]
    fn rejects_short_or_one_sided_sweeps() {
        let mut s = synthesize_sweep(&SyntheticSpec::symmetric(truth(), 600e-6, 7, 0.0, 1), 6e9, 4e9, 0.0).unwrap();
        assert!(s.validate().is_ok());
        s.sntj_voltages.pop();
        s.measured_output.pop();
        assert!(s.validate().is_err());
        let mut s = synthesize_sweep(&SyntheticSpec::symmetric(truth(), 600e-6, 9, 0.0, 1), 6e9, 4e9, 0.0).unwrap();
        s.sntj_voltages.iter_mut().for_each(|v| *v = v.abs() + 1e-6);
        assert!(s.validate().is_err());
    }

    #[test]
    fn sweep_csv_round_trip_and_errors() {
        let spec = SyntheticSpec::symmetric(truth(), 600e-6, 25, 0.01, 3);
        let sweep = synthesize_sweep(&spec, 6e9, 4e9, 0.05).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&sweep, &mut buf).unwrap();
        let meta = SweepMeta {
            frequency_hz: 6e9,
            idler_frequency_hz: 4e9,
            rbw_hz: 1e6,
            temperature_k: 0.05,
        };
        assert_eq!(read_sweep_csv(buf.as_slice(), &meta, Path::new("x.csv")).unwrap(), sweep);
        let bad = "voltage_v,power_w\n1e-4,2e-10\n2e-4,abc\n";
        match read_sweep_csv(bad.as_bytes(), &meta, Path::new("x.csv")) {
            Err(CalfitError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let no_header = "1e-4,2e-10\n";
        assert!(matches!(
            read_sweep_csv(no_header.as_bytes(), &meta, Path::new("x.csv")),
            Err(CalfitError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn band_medians_skip_failures() {
        let mut sweeps: Vec<NoiseSweep> = [5e9, 5.5e9, 7e9]
            .iter()
            .map(|&f| {
                synthesize_sweep(&SyntheticSpec::symmetric(truth(), 600e-6, 25, 0.0, 1), f, 12e9 - f, 0.05).unwrap()
            })
            .collect();
        sweeps[2].measured_output.pop();
        let fit = fit_band(&sweeps, &FitBounds::default(), (4e9, 8e9), None).unwrap();
        assert_eq!(fit.failed, 1);
        assert_eq!(fit.fitted_in_band, 2);
        assert!((fit.median_n_sys.unwrap() - 3.4).abs() < 1e-6);
        assert!(fit.points[2].error.is_some());
    }
}

//! Adaptive Dormand–Prince 5(4) integrator for complex-valued systems.
//!
//! The integrator lands exactly on every requested output abscissa, so the
//! caller gets the state on its own grid without interpolation.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size {h:e} fell below the minimum at x = {x:e}")]
    StepTooSmall { x: f64, h: f64 },
    #[error("exceeded {steps} steps before reaching x = {target:e} (stopped at x = {x:e})")]
    MaxSteps { x: f64, target: f64, steps: usize },
    #[error("state became non-finite at x = {x:e}")]
    NonFinite { x: f64 },
    #[error("output points must be increasing and start at or after x0")]
    BadOutputGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5Options {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; estimated from the right-hand side when `None`.
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Dopri5Options {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-12,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth minus fourth order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `dy/dx = f(x, y)` from `x0` and return the state at each of
/// `outputs` (which must be non-decreasing and ≥ `x0`).
pub fn integrate<F>(
    mut f: F,
    x0: f64,
    y0: &[Complex64],
    outputs: &[f64],
    opts: &Dopri5Options,
) -> Result<(Vec<Vec<Complex64>>, OdeStats), OdeError>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]),
{
    if outputs.first().is_some_and(|&x| x < x0) || outputs.windows(2).any(|w| w[1] < w[0]) {
        return Err(OdeError::BadOutputGrid);
    }
    let n = y0.len();
    let zero = Complex64::new(0.0, 0.0);
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut x = x0;
    let mut k: Vec<Vec<Complex64>> = vec![vec![zero; n]; 7];
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];
    f(x, &y, &mut k[0]);
    stats.evaluations += 1;

    let span = outputs.last().map_or(0.0, |&e| e - x0);
    let mut h = opts.h_init.unwrap_or_else(|| initial_step(&y, &k[0], span, opts));
    let mut out = Vec::with_capacity(outputs.len());
    let mut steps = 0usize;

    for &target in outputs {
        while x < target {
            if steps >= opts.max_steps {
                return Err(OdeError::MaxSteps { x, target, steps });
            }
            steps += 1;
            let remaining = target - x;
            let mut step = h.min(opts.h_max);
            let last = step >= remaining * (1.0 - 1e-12);
            if last {
                step = remaining;
            }
            if step <= 1e-14 * x.abs().max(span) {
                return Err(OdeError::StepTooSmall { x, h: step });
            }
            let stages: [(f64, &[f64]); 5] = [
                (C2, &[A21]),
                (C3, &[A31, A32]),
                (C4, &[A41, A42, A43]),
                (C5, &[A51, A52, A53, A54]),
                (1.0, &[A61, A62, A63, A64, A65]),
            ];
            for (s, (c, a)) in stages.iter().enumerate() {
                for i in 0..n {
                    let mut acc = zero;
                    for (j, aj) in a.iter().enumerate() {
                        acc += k[j][i] * *aj;
                    }
                    tmp[i] = y[i] + acc * step;
                }
                f(x + c * step, &tmp, &mut k[s + 1]);
            }
            for i in 0..n {
                y_new[i] = y[i]
                    + (k[0][i] * B1 + k[2][i] * B3 + k[3][i] * B4 + k[4][i] * B5 + k[5][i] * B6) * step;
            }
            f(x + step, &y_new, &mut k[6]);
            stats.evaluations += 6;

            let mut err2 = 0.0;
            for i in 0..n {
                let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6
                    + k[6][i] * E7)
                    * step;
                let sc = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err2 += (e.norm() / sc).powi(2);
            }
            let err = (err2 / n.max(1) as f64).sqrt();
            if !err.is_finite() || y_new.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                if step <= 1e-14 * x.abs().max(span) {
                    return Err(OdeError::NonFinite { x });
                }
                h = 0.1 * step;
                stats.rejected += 1;
                continue;
            }
            let factor = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
            if err <= 1.0 {
                stats.accepted += 1;
                x = if last { target } else { x + step };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                // keep the controller's proposal when the step was shortened
                // only to land on an output point
                h = if last { h.max(step * factor) } else { step * factor };
            } else {
                stats.rejected += 1;
                h = step * factor.min(1.0);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn initial_step(y: &[Complex64], dy: &[Complex64], span: f64, opts: &Dopri5Options) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for (yi, di) in y.iter().zip(dy) {
        let sc = opts.atol + opts.rtol * yi.norm();
        d0 += (yi.norm() / sc).powi(2);
        d1 += (di.norm() / sc).powi(2);
    }
    let h = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 * span } else { 0.01 * (d0 / d1).sqrt() };
    if span > 0.0 {
        h.min(span).max(1e-12 * span)
    } else {
        h
    }
}

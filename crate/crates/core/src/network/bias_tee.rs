//! On-chip bias tee: a series dc-block capacitor in the rf path and a
//! high-impedance kinetic-inductance line as the dc branch.
//!
//! Port 1 is the combined rf+dc node that feeds the amplifier, port 2 the rf
//! input behind the capacitor and port 3 the far end of the dc branch. The
//! dc branch is a uniform line of `squares · width` length with
//! L' = L_sheet / width and C' = L'/Z², joined at port 1.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{invalid, Abcd, FrequencyGrid, LineSection, NetworkError, NPortSParams};

/// How the far end of the dc branch is terminated when the tee is used as
/// a two-port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DcTermination {
    #[default]
    Open,
    /// Loaded by the reference impedance.
    Matched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasTeeSpec {
    pub series_capacitance: f64,
    pub dc_branch_squares: f64,
    pub dc_branch_width: f64,
    pub dc_branch_impedance: f64,
    pub sheet_inductance: f64,
}

impl BiasTeeSpec {
    /// 31.8 pF block (50 MHz corner in 50 Ω), 4000 squares of 2 µm wide
    /// 35 pH/□ film at 700 Ω.
    pub fn paper_device() -> Self {
        Self {
            series_capacitance: 31.8e-12,
            dc_branch_squares: 4000.0,
            dc_branch_width: 2e-6,
            dc_branch_impedance: 700.0,
            sheet_inductance: 35e-12,
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        for (field, v) in [
            ("series_capacitance", self.series_capacitance),
            ("dc_branch_squares", self.dc_branch_squares),
            ("dc_branch_width", self.dc_branch_width),
            ("dc_branch_impedance", self.dc_branch_impedance),
            ("sheet_inductance", self.sheet_inductance),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(field, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn total_inductance(&self) -> f64 {
        self.dc_branch_squares * self.sheet_inductance
    }

    pub fn branch_length(&self) -> f64 {
        self.dc_branch_squares * self.dc_branch_width
    }

    pub fn branch_section(&self) -> Result<LineSection, NetworkError> {
        self.validate()?;
        LineSection::from_impedance(
            self.dc_branch_impedance,
            self.sheet_inductance / self.dc_branch_width,
            self.branch_length(),
        )
    }

    fn capacitor_admittance(&self, f: f64) -> Complex64 {
        Complex64::new(0.0, 2.0 * PI * f * self.series_capacitance)
    }
}

/// Nodal solve of the tee with ports at the junction, the capacitor input
/// and (optionally) the far end of the dc branch. `dc_load` is the
/// admittance hanging on the branch end when it is not a port.
fn solve_tee(
    y_cap: Complex64,
    branch: &Abcd,
    z: f64,
    dc_is_port: bool,
    dc_load: Complex64,
) -> Result<DMatrix<Complex64>, NetworkError> {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let g = Complex64::new(1.0 / z, 0.0);
    let (a, b, c, d) = (branch[(0, 0)], branch[(0, 1)], branch[(1, 0)], branch[(1, 1)]);
    // unknowns: V_junction, V_rf, V_dc, I into branch at junction, I into branch at far end
    let y3 = if dc_is_port { g } else { dc_load };
    #[rustfmt::skip]
    let m = DMatrix::from_row_slice(5, 5, &[
        g + y_cap, -y_cap,     zero, one,  zero,
        -y_cap,    g + y_cap,  zero, zero, zero,
        zero,      zero,       y3,   zero, one,
        one,       zero,       -a,   zero, b,
        zero,      zero,       -c,   one,  d,
    ]);
    let lu = m.lu();
    let n = if dc_is_port { 3 } else { 2 };
    let mut s = DMatrix::from_element(n, n, zero);
    for port in 0..n {
        // Thevenin source of 1 V behind z is a Norton current of 1/z
        let mut rhs = DVector::from_element(5, zero);
        rhs[port] = g;
        let v = lu
            .solve(&rhs)
            .ok_or_else(|| invalid("bias_tee", "singular nodal matrix"))?;
        for row in 0..n {
            s[(row, port)] = 2.0 * v[row] - if row == port { one } else { zero };
        }
    }
    Ok(s)
}

/// Three-port S-parameters, all ports referenced to `z_ref`.
pub fn bias_tee_sparams(
    spec: &BiasTeeSpec,
    grid: &FrequencyGrid,
    z_ref: f64,
) -> Result<NPortSParams, NetworkError> {
    let branch = spec.branch_section()?;
    let mats = grid
        .iter()
        .enumerate()
        .map(|(k, f)| {
            solve_tee(spec.capacitor_admittance(f), &branch.abcd_at(f), z_ref, true, Complex64::new(0.0, 0.0))
                .map_err(|_| NetworkError::SingularConversion { index: k, frequency: f })
        })
        .collect::<Result<Vec<_>, _>>()?;
    NPortSParams::new(grid.clone(), z_ref, mats)
}

/// rf path (port 1 ↔ port 2) with the dc branch end open or loaded.
pub fn bias_tee_through(
    spec: &BiasTeeSpec,
    grid: &FrequencyGrid,
    z_ref: f64,
    termination: DcTermination,
) -> Result<NPortSParams, NetworkError> {
    let branch = spec.branch_section()?;
    let load = match termination {
        DcTermination::Open => Complex64::new(0.0, 0.0),
        DcTermination::Matched => Complex64::new(1.0 / z_ref, 0.0),
    };
    let mats = grid
        .iter()
        .enumerate()
        .map(|(k, f)| {
            solve_tee(spec.capacitor_admittance(f), &branch.abcd_at(f), z_ref, false, load)
                .map_err(|_| NetworkError::SingularConversion { index: k, frequency: f })
        })
        .collect::<Result<Vec<_>, _>>()?;
    NPortSParams::new(grid.clone(), z_ref, mats)
}

/// −3 dB corner of a series capacitor between matched source and load of
/// impedance `z_ref`, found by bisection on |S21|² = 1/2.
pub fn highpass_corner(capacitance: f64, z_ref: f64) -> f64 {
    let s21_sq = |f: f64| {
        let zc = Complex64::new(0.0, -1.0 / (2.0 * PI * f * capacitance));
        let s21 = 2.0 / (2.0 + zc / z_ref);
        s21.norm_sqr()
    };
    let (mut lo, mut hi) = (1.0, 1.0);
    while s21_sq(hi) < 0.5 {
        hi *= 2.0;
    }
    while s21_sq(lo) > 0.5 {
        lo /= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if s21_sq(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / hi < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Standing-wave resonances of the dc branch below `f_max`.
///
/// The junction end of the branch sits on a 50 Ω-class line, far below the
/// branch impedance, so the branch rings as a resonator that is nearly
/// shorted at the junction. A resonance is where the impedance looking into
/// the branch is real and below its characteristic impedance (Γ_in real and
/// negative): there the branch shunts the rf path hardest. Roots of Im(Γ_in)
/// are bracketed on a scan and refined by bisection. An open far end gives
/// the odd quarter-wave ladder, a low-impedance load the half-wave ladder.
pub fn dc_branch_resonances(
    spec: &BiasTeeSpec,
    f_max: f64,
    termination: DcTermination,
    z_ref: f64,
) -> Result<Vec<f64>, NetworkError> {
    if !(f_max > 0.0) {
        return Err(invalid("f_max", "must be > 0"));
    }
    let branch = spec.branch_section()?;
    let zc = branch.char_impedance;
    let gamma_load = match termination {
        DcTermination::Open => Complex64::new(1.0, 0.0),
        DcTermination::Matched => Complex64::new((z_ref - zc) / (z_ref + zc), 0.0),
    };
    if gamma_load.norm() < 1e-12 {
        return Ok(Vec::new());
    }
    let ratio = |f: f64| -> Complex64 {
        let m = branch.abcd_at(f);
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        // input impedance with load Z_L: (A·Z_L + B)/(C·Z_L + D); open: A/C
        let gamma_in = match termination {
            DcTermination::Open => {
                let y_in = c / a;
                (Complex64::new(1.0, 0.0) - zc * y_in) / (Complex64::new(1.0, 0.0) + zc * y_in)
            }
            DcTermination::Matched => {
                let zl = Complex64::new(z_ref, 0.0);
                let z_in = (a * zl + b) / (c * zl + d);
                (z_in - zc) / (z_in + zc)
            }
        };
        gamma_in
    };
    // scan finely against the branch's own quarter-wave spacing
    let half_wave = 1.0 / (2.0 * branch.delay());
    let step = half_wave / 128.0;
    let n = (f_max / step).ceil() as usize;
    let mut out = Vec::new();
    let mut f_prev = step * 1e-3;
    let mut r_prev = ratio(f_prev);
    for i in 1..=n {
        let f = (i as f64 * step).min(f_max);
        let r = ratio(f);
        if r.re < 0.0 && r_prev.re < 0.0 && r.im.signum() != r_prev.im.signum() {
            let (mut lo, mut hi) = (f_prev, f);
            let s_lo = ratio(lo).im.signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if ratio(mid).im.signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            let root = 0.5 * (lo + hi);
            if root <= f_max {
                out.push(root);
            }
        }
        f_prev = f;
        r_prev = r;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::amplitude_to_db;

    #[test]
    fn paper_branch_values() {
        let spec = BiasTeeSpec::paper_device();
        assert!((spec.total_inductance() - 140e-9).abs() < 1e-18);
        assert!((spec.branch_length() - 8e-3).abs() < 1e-15);
        let s = spec.branch_section().unwrap();
        assert!((s.phase_velocity() - 4e7).abs() / 4e7 < 1e-12);
    }

    #[test]
    fn corner_matches_rc_formula() {
        let c = 31.8e-12;
        let f = highpass_corner(c, 50.0);
        let expect = 1.0 / (2.0 * PI * 100.0 * c);
        assert!((f - expect).abs() / expect < 1e-9);
        assert!((f - 50e6).abs() / 50e6 < 0.01);
    }

    #[test]
    fn three_port_is_lossless_and_reciprocal() {
        let grid = FrequencyGrid::linspace(1e6, 30e9, 3001).unwrap();
        let s = bias_tee_sparams(&BiasTeeSpec::paper_device(), &grid, 50.0).unwrap();
        assert!(s.unitarity_error() < 1e-6);
        assert!(s.reciprocity_error() < 1e-8);
    }

    #[test]
    fn dc_passes_to_dc_port() {
        let grid = FrequencyGrid::new(vec![1e3, 1e4]).unwrap();
        let s = bias_tee_sparams(&BiasTeeSpec::paper_device(), &grid, 50.0).unwrap();
        assert!((s.get(0, 2, 0).norm() - 1.0).abs() < 1e-4);
        assert!(s.get(0, 1, 0).norm() < 1e-3);
    }

    #[test]
    fn high_frequency_through_between_resonances() {
        let spec = BiasTeeSpec::paper_device();
        let f1 = 1.0 / (2.0 * spec.branch_section().unwrap().delay());
        // an open stub is transparent at whole half waves, a low-impedance
        // terminated one at odd quarter waves
        let whole = FrequencyGrid::new(vec![12.0 * f1, 13.0 * f1]).unwrap();
        let odd = FrequencyGrid::new(vec![12.5 * f1, 13.5 * f1]).unwrap();
        let cases = [
            (bias_tee_through(&spec, &whole, 50.0, DcTermination::Open).unwrap(), &whole),
            (bias_tee_through(&spec, &odd, 50.0, DcTermination::Matched).unwrap(), &odd),
            (bias_tee_sparams(&spec, &odd, 50.0).unwrap(), &odd),
        ];
        for (s, grid) in cases {
            for k in 0..grid.len() {
                let db = amplitude_to_db(s.get(k, 1, 0).norm());
                assert!(db.abs() < 0.5, "{} {db}", grid.points()[k]);
            }
        }
    }

    #[test]
    fn resonances_are_transmission_dips() {
        let spec = BiasTeeSpec::paper_device();
        for term in [DcTermination::Open, DcTermination::Matched] {
            let r = dc_branch_resonances(&spec, 10e9, term, 50.0).unwrap();
            let grid = FrequencyGrid::new(r.clone()).unwrap();
            let s = bias_tee_through(&spec, &grid, 50.0, term).unwrap();
            for k in 0..grid.len() {
                assert!(amplitude_to_db(s.get(k, 1, 0).norm()) < -3.0, "{term:?} {}", r[k]);
            }
        }
    }

    #[test]
    fn resonances_form_harmonic_ladder() {
        let spec = BiasTeeSpec::paper_device();
        let open = dc_branch_resonances(&spec, 29e9, DcTermination::Open, 50.0).unwrap();
        let loaded = dc_branch_resonances(&spec, 29e9, DcTermination::Matched, 50.0).unwrap();
        // v/4ℓ and v/2ℓ with v = 4e7 m/s, ℓ = 8 mm
        assert!((open[0] - 1.25e9).abs() / 1.25e9 < 1e-9);
        assert!((loaded[0] - 2.5e9).abs() / 2.5e9 < 1e-9);
        assert_eq!(open.len(), 12);
        assert_eq!(loaded.len(), 11);
        for (n, f) in open.iter().enumerate() {
            let expect = (2 * n + 1) as f64 * open[0];
            assert!((f - expect).abs() / expect < 1e-6);
        }
        for (n, f) in loaded.iter().enumerate() {
            let expect = (n + 1) as f64 * loaded[0];
            assert!((f - expect).abs() / expect < 1e-6);
        }
        let matched = dc_branch_resonances(&spec, 30e9, DcTermination::Matched, 700.0).unwrap();
        assert!(matched.is_empty());
    }

    #[test]
    fn doubling_length_halves_resonances() {
        let spec = BiasTeeSpec::paper_device();
        let long = BiasTeeSpec {
            dc_branch_squares: 2.0 * spec.dc_branch_squares,
            ..spec
        };
        let a = dc_branch_resonances(&spec, 20e9, DcTermination::Open, 50.0).unwrap();
        let b = dc_branch_resonances(&long, 20e9, DcTermination::Open, 50.0).unwrap();
        assert!(b.len() >= 2 * a.len() - 1);
        for (fa, fb) in a.iter().zip(&b) {
            assert!((fb - fa / 2.0).abs() / fa < 1e-9);
        }
    }
}

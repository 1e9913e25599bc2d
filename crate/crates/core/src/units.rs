//! Physical constants and unit conversions.
//!
//! Everything inside the crate is SI. Decibels and pH/□ only appear at the
//! edges (config files, reports).

/// Planck constant (J·s), exact SI value.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant (J/K), exact SI value.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Elementary charge (C), exact SI value.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Power ratio to dB.
pub fn power_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// dB to power ratio.
pub fn db_to_power(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Magnitude of a field quantity (e.g. an S-parameter) to dB.
pub fn amplitude_to_db(mag: f64) -> f64 {
    20.0 * mag.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * db_to_power(dbm)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    power_to_db(watts / 1e-3)
}

/// Peak current of a sinusoid delivering `power` watts into a matched
/// resistive line of impedance `z0`: P = I²·Z₀/2.
pub fn power_to_peak_current(power: f64, z0: f64) -> f64 {
    (2.0 * power / z0).sqrt()
}

pub fn peak_current_to_power(current: f64, z0: f64) -> f64 {
    0.5 * current * current * z0
}

pub fn ph_per_square(henry_per_square: f64) -> f64 {
    henry_per_square * 1e12
}

pub fn from_ph_per_square(ph: f64) -> f64 {
    ph * 1e-12
}

/// Median of a slice; mean of the two central values for even lengths.
/// Returns `None` for an empty slice.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Linear interpolation of `ys(xs)` at `x`; `xs` must be increasing.
/// Values outside the table are clamped to the end points.
pub fn interp_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n == 1 || x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let hi = xs.partition_point(|&p| p < x);
    let lo = hi - 1;
    let t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    ys[lo] + t * (ys[hi] - ys[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn db_round_trip() {
        assert!((db_to_power(power_to_db(56.2)) - 56.2).abs() < 1e-12);
        assert!((power_to_db(100.0) - 20.0).abs() < 1e-12);
        assert!((amplitude_to_db(0.1) + 20.0).abs() < 1e-12);
    }

    #[test]
    fn pump_power_conversion() {
        let i = power_to_peak_current(dbm_to_watts(-45.0), 50.0);
        assert!((watts_to_dbm(peak_current_to_power(i, 50.0)) + 45.0).abs() < 1e-9);
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn interpolation_clamps() {
        let xs = [1.0, 2.0, 4.0];
        let ys = [10.0, 20.0, 0.0];
        assert_eq!(interp_linear(&xs, &ys, 0.0), 10.0);
        assert_eq!(interp_linear(&xs, &ys, 3.0), 10.0);
        assert_eq!(interp_linear(&xs, &ys, 9.0), 0.0);
    }
}

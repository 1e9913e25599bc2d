use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{Abcd, FrequencyGrid, NetworkError, TwoPortChain};

/// Scattering matrices of an n-port on a frequency grid, normalised to a
/// single real reference impedance.
#[derive(Debug, Clone, PartialEq)]
pub struct NPortSParams {
    grid: FrequencyGrid,
    n_ports: usize,
    reference_impedance: f64,
    matrices: Vec<DMatrix<Complex64>>,
}

impl NPortSParams {
    pub fn new(
        grid: FrequencyGrid,
        reference_impedance: f64,
        matrices: Vec<DMatrix<Complex64>>,
    ) -> Result<Self, NetworkError> {
        let n_ports = matrices.first().map(|m| m.nrows()).unwrap_or(0);
        if n_ports == 0 {
            return Err(NetworkError::InvalidGrid("no S matrices".into()));
        }
        if matrices.len() != grid.len() {
            return Err(NetworkError::InvalidGrid(format!(
                "{} matrices for {} frequencies",
                matrices.len(),
                grid.len()
            )));
        }
        if let Some(m) = matrices.iter().find(|m| m.nrows() != n_ports || m.ncols() != n_ports) {
            return Err(NetworkError::PortCount {
                expected: n_ports,
                actual: m.nrows().max(m.ncols()),
            });
        }
        if !(reference_impedance > 0.0) {
            return Err(super::invalid("reference_impedance", "must be > 0"));
        }
        Ok(Self {
            grid,
            n_ports,
            reference_impedance,
            matrices,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn n_ports(&self) -> usize {
        self.n_ports
    }

    pub fn reference_impedance(&self) -> f64 {
        self.reference_impedance
    }

    pub fn matrices(&self) -> &[DMatrix<Complex64>] {
        &self.matrices
    }

    /// S_(row+1)(col+1) at frequency index `k` (zero-based port indices).
    pub fn get(&self, k: usize, row: usize, col: usize) -> Complex64 {
        self.matrices[k][(row, col)]
    }

    /// max_k ‖S − Sᵀ‖ (largest element magnitude).
    pub fn reciprocity_error(&self) -> f64 {
        self.matrices
            .iter()
            .map(|s| max_abs(&(s - s.transpose())))
            .fold(0.0, f64::max)
    }

    /// max_k ‖S†S − I‖ (largest element magnitude).
    pub fn unitarity_error(&self) -> f64 {
        let eye = DMatrix::<Complex64>::identity(self.n_ports, self.n_ports);
        self.matrices
            .iter()
            .map(|s| max_abs(&(s.adjoint() * s - &eye)))
            .fold(0.0, f64::max)
    }

    /// Largest |S_ij| anywhere on the grid.
    pub fn max_magnitude(&self) -> f64 {
        self.matrices
            .iter()
            .map(|s| max_abs(s))
            .fold(0.0, f64::max)
    }
}

fn max_abs(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Two-port ABCD to S against a real reference impedance.
pub fn abcd_to_sparams(chain: &TwoPortChain, z_ref: f64) -> Result<NPortSParams, NetworkError> {
    if !(z_ref > 0.0) {
        return Err(super::invalid("z_ref", format!("must be > 0, got {z_ref}")));
    }
    let z = Complex64::new(z_ref, 0.0);
    let mut out = Vec::with_capacity(chain.len());
    for (k, m) in chain.matrices().iter().enumerate() {
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let den = a + b / z + c * z + d;
        if !(den.norm() > 1e-300) || !den.is_finite() {
            return Err(NetworkError::SingularConversion {
                index: k,
                frequency: chain.grid().points()[k],
            });
        }
        let s11 = (a + b / z - c * z - d) / den;
        let s12 = 2.0 * (a * d - b * c) / den;
        let s21 = Complex64::new(2.0, 0.0) / den;
        let s22 = (-a + b / z - c * z + d) / den;
        out.push(DMatrix::from_row_slice(2, 2, &[s11, s12, s21, s22]));
    }
    NPortSParams::new(chain.grid().clone(), z_ref, out)
}

/// Cascade of two-ports in the scattering domain (Redheffer star product).
/// Stays bounded where the ABCD product of a long stopband chain overflows.
pub fn star_product(first: &NPortSParams, second: &NPortSParams) -> Result<NPortSParams, NetworkError> {
    for s in [first, second] {
        if s.n_ports() != 2 {
            return Err(NetworkError::PortCount {
                expected: 2,
                actual: s.n_ports(),
            });
        }
    }
    if first.grid() != second.grid() {
        return Err(NetworkError::InvalidGrid("star product of mismatched grids".into()));
    }
    if first.reference_impedance() != second.reference_impedance() {
        return Err(super::invalid("reference_impedance", "star product needs a common reference"));
    }
    let mut out = Vec::with_capacity(first.grid().len());
    for (k, (a, b)) in first.matrices().iter().zip(second.matrices()).enumerate() {
        out.push(star2(a, b).ok_or(NetworkError::SingularConversion {
            index: k,
            frequency: first.grid().points()[k],
        })?);
    }
    NPortSParams::new(first.grid().clone(), first.reference_impedance(), out)
}

/// `n` identical two-ports in cascade, by repeated squaring of the star product.
pub fn star_power(s: &NPortSParams, mut n: u64) -> Result<NPortSParams, NetworkError> {
    if s.n_ports() != 2 {
        return Err(NetworkError::PortCount {
            expected: 2,
            actual: s.n_ports(),
        });
    }
    let through = DMatrix::from_row_slice(
        2,
        2,
        &[Complex64::ZERO, Complex64::ONE, Complex64::ONE, Complex64::ZERO],
    );
    let mut result = NPortSParams::new(s.grid().clone(), s.reference_impedance(), vec![through; s.grid().len()])?;
    let mut base = s.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = star_product(&result, &base)?;
        }
        n >>= 1;
        if n > 0 {
            base = star_product(&base, &base)?;
        }
    }
    Ok(result)
}

fn star2(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Option<DMatrix<Complex64>> {
    let den = Complex64::ONE - a[(1, 1)] * b[(0, 0)];
    if !(den.norm() > 1e-300) {
        return None;
    }
    let s11 = a[(0, 0)] + a[(0, 1)] * b[(0, 0)] * a[(1, 0)] / den;
    let s12 = a[(0, 1)] * b[(0, 1)] / den;
    let s21 = a[(1, 0)] * b[(1, 0)] / den;
    let s22 = b[(1, 1)] + b[(1, 0)] * a[(1, 1)] * b[(0, 1)] / den;
    Some(DMatrix::from_row_slice(2, 2, &[s11, s12, s21, s22]))
}

/// Inverse of [`abcd_to_sparams`]; requires a two-port with S21 ≠ 0.
pub fn sparams_to_abcd(s: &NPortSParams) -> Result<TwoPortChain, NetworkError> {
    if s.n_ports() != 2 {
        return Err(NetworkError::PortCount {
            expected: 2,
            actual: s.n_ports(),
        });
    }
    let z = s.reference_impedance();
    let mut out = Vec::with_capacity(s.grid().len());
    for (k, m) in s.matrices().iter().enumerate() {
        let (s11, s12, s21, s22) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        if !(s21.norm() > 1e-300) {
            return Err(NetworkError::SingularConversion {
                index: k,
                frequency: s.grid().points()[k],
            });
        }
        let one = Complex64::new(1.0, 0.0);
        let den = 2.0 * s21;
        let a = ((one + s11) * (one - s22) + s12 * s21) / den;
        let b = z * ((one + s11) * (one + s22) - s12 * s21) / den;
        let c = ((one - s11) * (one - s22) - s12 * s21) / (den * z);
        let d = ((one - s11) * (one + s22) + s12 * s21) / den;
        out.push(Abcd::new(a, b, c, d));
    }
    TwoPortChain::new(s.grid().clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{line_abcd, LineSection};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn identity_is_thru() {
        let grid = FrequencyGrid::linspace(1e9, 2e9, 3).unwrap();
        let s = abcd_to_sparams(&TwoPortChain::identity(&grid), 50.0).unwrap();
        for k in 0..3 {
            assert!(s.get(k, 0, 0).norm() < 1e-15);
            assert!((s.get(k, 1, 0) - 1.0).norm() < 1e-15);
            assert!((s.get(k, 0, 1) - 1.0).norm() < 1e-15);
            assert!(s.get(k, 1, 1).norm() < 1e-15);
        }
    }

    #[test]
    fn series_fifty_ohms() {
        let grid = FrequencyGrid::new(vec![1e9]).unwrap();
        let chain = TwoPortChain::series_impedance(&grid, |_| Complex64::new(50.0, 0.0));
        let s = abcd_to_sparams(&chain, 50.0).unwrap();
        assert!((s.get(0, 0, 0) - 1.0 / 3.0).norm() < 1e-15);
        assert!((s.get(0, 1, 0) - 2.0 / 3.0).norm() < 1e-15);
    }

    #[test]
    fn half_wave_inverts() {
        let line = LineSection::from_impedance(50.0, 3.5e-5, 0.02).unwrap();
        let f = PI / (2.0 * PI * line.delay());
        let grid = FrequencyGrid::new(vec![f]).unwrap();
        let s = abcd_to_sparams(&line_abcd(&line, &grid), 50.0).unwrap();
        assert!((s.get(0, 1, 0) + 1.0).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_reference() {
        let grid = FrequencyGrid::new(vec![1e9]).unwrap();
        assert!(abcd_to_sparams(&TwoPortChain::identity(&grid), 0.0).is_err());
    }

    #[test]
    fn singular_denominator_names_index() {
        let grid = FrequencyGrid::new(vec![1e9, 2e9]).unwrap();
        let nan = Complex64::new(f64::NAN, 0.0);
        let chain = TwoPortChain::new(
            grid,
            vec![Abcd::identity(), Abcd::new(nan, nan, nan, nan)],
        )
        .unwrap();
        assert_eq!(
            abcd_to_sparams(&chain, 50.0).unwrap_err(),
            NetworkError::SingularConversion { index: 1, frequency: 2e9 }
        );
    }

    proptest! {
        #[test]
        fn abcd_s_round_trip(z0 in 5.0f64..500.0, len in 1e-4f64..0.1, zs in 0.0f64..200.0,
                             loss in 0.0f64..5.0) {
            let grid = FrequencyGrid::linspace(0.1e9, 30e9, 64).unwrap();
            let line = LineSection::from_impedance(z0, 3.5e-5, len).unwrap().with_loss(loss);
            let chain = line_abcd(&line, &grid)
                .then(&TwoPortChain::series_impedance(&grid, |f| Complex64::new(zs, 1e-9 * f)))
                .unwrap();
            let back = sparams_to_abcd(&abcd_to_sparams(&chain, 50.0).unwrap()).unwrap();
            for (a, b) in chain.matrices().iter().zip(back.matrices()) {
                // relative to the matrix scale (B carries Ω, C carries S)
                let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
                prop_assert!((a - b).iter().all(|z| z.norm() / scale < 1e-10));
            }
        }
    }
}

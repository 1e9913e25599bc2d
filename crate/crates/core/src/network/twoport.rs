use nalgebra::Matrix2;
use num_complex::Complex64;

use super::{FrequencyGrid, NetworkError};

/// ABCD (transmission) matrix of a two-port at one frequency.
pub type Abcd = Matrix2<Complex64>;

/// Frequency-indexed ABCD matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPortChain {
    grid: FrequencyGrid,
    abcd: Vec<Abcd>,
}

impl TwoPortChain {
    pub fn new(grid: FrequencyGrid, abcd: Vec<Abcd>) -> Result<Self, NetworkError> {
        if grid.len() != abcd.len() {
            return Err(NetworkError::InvalidGrid(format!(
                "{} matrices for {} frequencies",
                abcd.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, abcd })
    }

    /// Build a chain by evaluating `f` at each grid frequency.
    pub fn from_fn(grid: &FrequencyGrid, f: impl Fn(f64) -> Abcd) -> Self {
        let abcd = grid.iter().map(f).collect();
        Self {
            grid: grid.clone(),
            abcd,
        }
    }

    pub fn identity(grid: &FrequencyGrid) -> Self {
        Self::from_fn(grid, |_| Abcd::identity())
    }

    /// Series impedance `z(f)` between the two ports.
    pub fn series_impedance(grid: &FrequencyGrid, z: impl Fn(f64) -> Complex64) -> Self {
        Self::from_fn(grid, |f| {
            Abcd::new(Complex64::new(1.0, 0.0), z(f), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))
        })
    }

    /// Shunt admittance `y(f)` across the line.
    pub fn shunt_admittance(grid: &FrequencyGrid, y: impl Fn(f64) -> Complex64) -> Self {
        Self::from_fn(grid, |f| {
            Abcd::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), y(f), Complex64::new(1.0, 0.0))
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn matrices(&self) -> &[Abcd] {
        &self.abcd
    }

    pub fn at(&self, index: usize) -> &Abcd {
        &self.abcd[index]
    }

    pub fn len(&self) -> usize {
        self.abcd.len()
    }

    pub fn is_empty(&self) -> bool {
        self.abcd.is_empty()
    }

    /// `self` followed by `next` (signal enters `self` first).
    pub fn then(&self, next: &TwoPortChain) -> Result<TwoPortChain, NetworkError> {
        if self.grid != next.grid {
            return Err(NetworkError::GridMismatch { index: 1 });
        }
        let abcd = self.abcd.iter().zip(&next.abcd).map(|(a, b)| a * b).collect();
        Ok(TwoPortChain {
            grid: self.grid.clone(),
            abcd,
        })
    }

    /// `n` identical copies in cascade, by repeated squaring.
    pub fn power(&self, n: u64) -> TwoPortChain {
        let abcd = self.abcd.iter().map(|m| matrix_power(m, n)).collect();
        TwoPortChain {
            grid: self.grid.clone(),
            abcd,
        }
    }

    pub fn determinants(&self) -> Vec<Complex64> {
        self.abcd.iter().map(|m| m.determinant()).collect()
    }
}

fn matrix_power(m: &Abcd, mut n: u64) -> Abcd {
    let mut result = Abcd::identity();
    let mut base = *m;
    while n > 0 {
        if n & 1 == 1 {
            result *= base;
        }
        base = base * base;
        n >>= 1;
    }
    result
}

/// Cascade chains in order; all must share one frequency grid.
pub fn cascade(chains: &[TwoPortChain]) -> Result<TwoPortChain, NetworkError> {
    let first = chains
        .first()
        .ok_or_else(|| NetworkError::InvalidGrid("nothing to cascade".into()))?;
    if let Some(i) = chains.iter().position(|c| c.grid != first.grid) {
        return Err(NetworkError::GridMismatch { index: i });
    }
    let mut out = first.clone();
    for c in &chains[1..] {
        for (acc, m) in out.abcd.iter_mut().zip(&c.abcd) {
            *acc *= m;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{line_abcd, LineSection};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_diff(a: &TwoPortChain, b: &TwoPortChain) -> f64 {
        a.matrices()
            .iter()
            .zip(b.matrices())
            .map(|(x, y)| (x - y).iter().map(|z| z.norm()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }

    fn sample_chain(grid: &FrequencyGrid, z0: f64, len: f64) -> TwoPortChain {
        let l = 4e-7;
        line_abcd(&LineSection::from_impedance(z0, l, len).unwrap(), grid)
    }

    #[test]
    fn identity_is_neutral() {
        let grid = FrequencyGrid::linspace(1e9, 10e9, 7).unwrap();
        let x = sample_chain(&grid, 37.0, 0.01);
        let y = cascade(&[x.clone(), TwoPortChain::identity(&grid)]).unwrap();
        assert!(max_diff(&x, &y) == 0.0);
    }

    #[test]
    fn cascade_is_associative() {
        let grid = FrequencyGrid::linspace(1e9, 10e9, 9).unwrap();
        let a = sample_chain(&grid, 37.0, 0.011);
        let b = TwoPortChain::series_impedance(&grid, |f| c(3.0, 1e-9 * f));
        let cc = sample_chain(&grid, 81.0, 0.003);
        let left = cascade(&[a.clone(), cascade(&[b.clone(), cc.clone()]).unwrap()]).unwrap();
        let right = cascade(&[cascade(&[a, b]).unwrap(), cc]).unwrap();
        assert!(max_diff(&left, &right) < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let g1 = FrequencyGrid::linspace(1e9, 2e9, 3).unwrap();
        let g2 = FrequencyGrid::linspace(1e9, 3e9, 3).unwrap();
        let err = cascade(&[TwoPortChain::identity(&g1), TwoPortChain::identity(&g2)]).unwrap_err();
        assert_eq!(err, NetworkError::GridMismatch { index: 1 });
        assert!(TwoPortChain::identity(&g1).then(&TwoPortChain::identity(&g2)).is_err());
    }

    #[test]
    fn power_matches_repeated_product() {
        let grid = FrequencyGrid::linspace(1e9, 5e9, 4).unwrap();
        let a = sample_chain(&grid, 63.0, 0.002);
        let mut slow = TwoPortChain::identity(&grid);
        for _ in 0..13 {
            slow = slow.then(&a).unwrap();
        }
        assert!(max_diff(&slow, &a.power(13)) < 1e-10);
        assert!(max_diff(&TwoPortChain::identity(&grid), &a.power(0)) == 0.0);
    }
}

//! Frequency-domain linear network engine.
//!
//! Two-ports are carried as ABCD matrices on a [`FrequencyGrid`] and
//! converted to scattering parameters against a real reference impedance.
//! The supercell line, the coupled-line directional coupler and the bias tee
//! are built on top of these primitives.

mod bias_tee;
mod bloch;
mod coupler;
mod line;
mod sparams;
mod supercell;
pub mod io;
mod twoport;

pub use bias_tee::{
    bias_tee_sparams, bias_tee_through, dc_branch_resonances, highpass_corner, BiasTeeSpec,
    DcTermination,
};
pub use bloch::{bloch_dispersion, BlochPoint, Dispersion, Stopband};
pub use coupler::{coupler_metrics, coupler_sparams, CouplerPoint, CouplerSpec};
pub use line::{line_abcd, LineSection};
pub use sparams::{abcd_to_sparams, sparams_to_abcd, star_power, star_product, NPortSParams};
pub use supercell::{medium_sparams, supercell_chain, SupercellChains, SupercellSpec};
pub use twoport::{cascade, Abcd, TwoPortChain};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("frequency grid: {0}")]
    InvalidGrid(String),
    #[error("frequency grids differ (chain {index} does not match the first chain)")]
    GridMismatch { index: usize },
    #[error("invalid {field}: {reason}")]
    InvalidSpec { field: &'static str, reason: String },
    #[error("singular conversion at frequency index {index} ({frequency} Hz)")]
    SingularConversion { index: usize, frequency: f64 },
    #[error("ABCD determinant {det} at index {index} is not 1; Bloch analysis needs a reciprocal cell")]
    NotUnimodular { index: usize, det: f64 },
    #[error("expected a {expected}-port network, got {actual} ports")]
    PortCount { expected: usize, actual: usize },
    #[error("frequency {frequency} Hz lies outside the dispersion grid")]
    OutsideGrid { frequency: f64 },
    #[error("frequency {frequency} Hz lies in a stopband")]
    InStopband { frequency: f64 },
}

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> NetworkError {
    NetworkError::InvalidSpec {
        field,
        reason: reason.into(),
    }
}

/// Strictly increasing list of positive frequencies (Hz).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, NetworkError> {
        if points.is_empty() {
            return Err(NetworkError::InvalidGrid("grid is empty".into()));
        }
        if let Some(p) = points.iter().find(|p| !(**p > 0.0) || !p.is_finite()) {
            return Err(NetworkError::InvalidGrid(format!(
                "frequency {p} is not positive and finite"
            )));
        }
        if let Some(w) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(NetworkError::InvalidGrid(format!(
                "points must be strictly increasing (index {})",
                w + 1
            )));
        }
        Ok(Self { points })
    }

    /// `n` evenly spaced points from `start` to `stop` inclusive.
    pub fn linspace(start: f64, stop: f64, n: usize) -> Result<Self, NetworkError> {
        match n {
            0 => Err(NetworkError::InvalidGrid("grid needs at least one point".into())),
            1 => Self::new(vec![start]),
            _ => {
                let step = (stop - start) / (n - 1) as f64;
                let mut pts: Vec<f64> = (0..n).map(|i| start + step * i as f64).collect();
                pts[n - 1] = stop;
                Self::new(pts)
            }
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().copied()
    }
}

impl TryFrom<Vec<f64>> for FrequencyGrid {
    type Error = NetworkError;
    fn try_from(points: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(points)
    }
}

impl From<FrequencyGrid> for Vec<f64> {
    fn from(g: FrequencyGrid) -> Self {
        g.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_points() {
        assert!(FrequencyGrid::new(vec![]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![0.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![2.0, 1.0]).is_err());
        assert!(FrequencyGrid::new(vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn linspace_hits_end_points() {
        let g = FrequencyGrid::linspace(1e9, 2e9, 11).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g.first(), 1e9);
        assert_eq!(g.last(), 2e9);
        assert!((g.points()[5] - 1.5e9).abs() < 1e-3);
    }

    #[test]
    fn grid_serde_validates() {
        let g: Result<FrequencyGrid, _> = serde_json::from_str("[3.0, 2.0]");
        assert!(g.is_err());
        let g: FrequencyGrid = serde_json::from_str("[1.0, 2.0]").unwrap();
        assert_eq!(g.len(), 2);
    }
}

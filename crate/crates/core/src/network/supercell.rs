use serde::{Deserialize, Serialize};

use super::{
    abcd_to_sparams, invalid, line_abcd, star_power, FrequencyGrid, LineSection, NPortSParams, NetworkError,
    TwoPortChain,
};
use crate::nonlinearity::FilmSpec;

/// Periodic loading pattern of the amplification medium: a run of
/// `n_unloaded` matched cells followed by `n_loaded` mismatched cells,
/// repeated `n_supercells` times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupercellSpec {
    pub n_unloaded: u32,
    pub n_loaded: u32,
    pub unloaded_z0: f64,
    pub loaded_z0: f64,
    pub unit_cell_length: f64,
    pub n_supercells: u32,
    /// Distributed attenuation of the line (Np/m); zero for a lossless medium.
    #[serde(default)]
    pub loss_per_length: f64,
}

impl SupercellSpec {
    /// 30 unloaded cells at 50 Ω, 4 loaded cells at 80 Ω, 2 µm cells,
    /// 1200 supercells.
    pub fn paper_device() -> Self {
        Self {
            n_unloaded: 30,
            n_loaded: 4,
            unloaded_z0: 50.0,
            loaded_z0: 80.0,
            unit_cell_length: 2e-6,
            n_supercells: 1200,
            loss_per_length: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.n_supercells == 0 {
            return Err(invalid("n_supercells", "medium has zero length (n_supercells = 0)"));
        }
        if self.n_unloaded + self.n_loaded == 0 {
            return Err(invalid("supercell", "a supercell needs at least one cell"));
        }
        if !(self.unit_cell_length > 0.0) {
            return Err(invalid("unit_cell_length", "must be > 0"));
        }
        if !(self.unloaded_z0 > 0.0) || !(self.loaded_z0 > 0.0) {
            return Err(invalid("z0", "cell impedances must be > 0"));
        }
        if !(self.loss_per_length >= 0.0) {
            return Err(invalid("loss_per_length", "must be >= 0"));
        }
        Ok(())
    }

    pub fn cells_per_supercell(&self) -> u32 {
        self.n_unloaded + self.n_loaded
    }

    pub fn supercell_length(&self) -> f64 {
        f64::from(self.cells_per_supercell()) * self.unit_cell_length
    }

    pub fn total_length(&self) -> f64 {
        f64::from(self.n_supercells) * self.supercell_length()
    }

    /// The unloaded and loaded runs of one supercell as uniform sections.
    /// Both share the film's kinetic inductance per length; the capacitance
    /// is lowered in the loaded run to raise its impedance. A run with zero
    /// cells is returned as `None`.
    pub fn sections(
        &self,
        film: &FilmSpec,
    ) -> Result<(Option<LineSection>, Option<LineSection>), NetworkError> {
        self.validate()?;
        let l = film.inductance_per_length();
        let run = |n: u32, z0: f64| -> Result<Option<LineSection>, NetworkError> {
            if n == 0 {
                return Ok(None);
            }
            let len = f64::from(n) * self.unit_cell_length;
            Ok(Some(
                LineSection::from_impedance(z0, l, len)?.with_loss(self.loss_per_length),
            ))
        };
        Ok((
            run(self.n_unloaded, self.unloaded_z0)?,
            run(self.n_loaded, self.loaded_z0)?,
        ))
    }
}

/// ABCD of a single supercell and of the full medium.
#[derive(Debug, Clone)]
pub struct SupercellChains {
    pub supercell: TwoPortChain,
    pub medium: TwoPortChain,
    pub supercell_length: f64,
    pub medium_length: f64,
}

pub fn supercell_chain(
    spec: &SupercellSpec,
    film: &FilmSpec,
    grid: &FrequencyGrid,
) -> Result<SupercellChains, NetworkError> {
    let (unloaded, loaded) = spec.sections(film)?;
    let mut cell = TwoPortChain::identity(grid);
    for s in [unloaded, loaded].into_iter().flatten() {
        cell = cell.then(&line_abcd(&s, grid))?;
    }
    let medium = cell.power(u64::from(spec.n_supercells));
    Ok(SupercellChains {
        supercell: cell,
        medium,
        supercell_length: spec.supercell_length(),
        medium_length: spec.total_length(),
    })
}

/// S-parameters of the full medium, cascaded in the scattering domain so the
/// stopbands stay finite.
pub fn medium_sparams(
    spec: &SupercellSpec,
    film: &FilmSpec,
    grid: &FrequencyGrid,
    z_ref: f64,
) -> Result<NPortSParams, NetworkError> {
    let chains = supercell_chain(spec, film, grid)?;
    let cell = abcd_to_sparams(&chains.supercell, z_ref)?;
    star_power(&cell, u64::from(spec.n_supercells))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_medium_is_8_16_cm() {
        let spec = SupercellSpec::paper_device();
        assert!((spec.total_length() - 0.0816).abs() < 1e-15);
        assert_eq!(spec.cells_per_supercell(), 34);
    }

    #[test]
    fn zero_supercells_rejected() {
        let spec = SupercellSpec {
            n_supercells: 0,
            ..SupercellSpec::paper_device()
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn supercell_is_unimodular() {
        let grid = FrequencyGrid::linspace(0.1e9, 40e9, 401).unwrap();
        let chains = supercell_chain(&SupercellSpec::paper_device(), &FilmSpec::nbtin_10nm(), &grid)
            .unwrap();
        for d in chains.supercell.determinants() {
            assert!((d - 1.0).norm() < 1e-8);
        }
        // the full medium only stays well conditioned in the first passband
        for (f, d) in grid.iter().zip(chains.medium.determinants()) {
            if f < 10e9 {
                assert!((d - 1.0).norm() < 1e-8, "{f} {d}");
            }
        }
    }

    #[test]
    fn star_cascade_matches_abcd_in_passband() {
        let grid = FrequencyGrid::linspace(0.5e9, 9.5e9, 91).unwrap();
        let spec = SupercellSpec::paper_device();
        let chains = supercell_chain(&spec, &FilmSpec::nbtin_10nm(), &grid).unwrap();
        let via_abcd = abcd_to_sparams(&chains.medium, 50.0).unwrap();
        let via_star = medium_sparams(&spec, &FilmSpec::nbtin_10nm(), &grid, 50.0).unwrap();
        for (a, b) in via_abcd.matrices().iter().zip(via_star.matrices()) {
            assert!((a - b).iter().all(|z| z.norm() < 1e-8));
        }
    }

    #[test]
    fn star_cascade_is_unitary_in_stopbands() {
        let grid = FrequencyGrid::linspace(10e9, 30e9, 401).unwrap();
        let s = medium_sparams(&SupercellSpec::paper_device(), &FilmSpec::nbtin_10nm(), &grid, 50.0).unwrap();
        assert!(s.unitarity_error() < 1e-10);
        assert!(s.reciprocity_error() < 1e-10);
    }

    #[test]
    fn loaded_run_has_lower_capacitance() {
        let (u, l) = SupercellSpec::paper_device()
            .sections(&FilmSpec::nbtin_10nm())
            .unwrap();
        let (u, l) = (u.unwrap(), l.unwrap());
        assert_eq!(u.inductance_per_length, l.inductance_per_length);
        assert!(l.capacitance_per_length < u.capacitance_per_length);
        assert!((l.char_impedance - 80.0).abs() < 1e-9);
        assert!((u.length - 60e-6).abs() < 1e-18);
        assert!((l.length - 8e-6).abs() < 1e-18);
    }

    #[test]
    fn unloaded_limit_is_uniform_line() {
        let spec = SupercellSpec {
            n_loaded: 0,
            ..SupercellSpec::paper_device()
        };
        let (u, l) = spec.sections(&FilmSpec::nbtin_10nm()).unwrap();
        assert!(l.is_none());
        assert!((u.unwrap().char_impedance - 50.0).abs() < 1e-12);
    }
}

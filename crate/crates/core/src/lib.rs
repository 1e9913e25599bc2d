//! Design and analysis toolkit for kinetic-inductance traveling-wave
//! parametric amplifiers with on-chip bias tees and directional couplers.
//!
//! * [`nonlinearity`]: current-dependent kinetic inductance and mixing
//!   coefficients.
//! * [`network`]: ABCD/S-parameter engine, periodic-line dispersion and
//!   component models.
//! * [`gain`]: three-wave-mixing coupled-mode solver and gain profiles.
//! * [`noisechain`]: cascaded readout-chain noise model.
//! * [`calfit`]: shot-noise-junction calibration sweeps and bounded fits.

pub mod calfit;
pub mod gain;
pub mod network;
pub mod noisechain;
pub mod nonlinearity;
pub mod ode;
pub mod units;

//! Photon-normalized noise of a three-stage readout chain.
//!
//! The chain is η₁ → FSA → η₂ → HEMT → WAMP. Each efficiency is a
//! beamsplitter mixing in thermal occupancy of its bath, the FSA is phase
//! insensitive with signal and idler inputs, and the third stage is taken as
//! noiseless and lossless. With tildes marking quantities referred through
//! the losses:
//!
//! ```text
//! Ñ_in   = η₁·N_in + N_T₁·(1 − η₁)
//! Ñ_ex   = [N_ex^s + N_T₁^s(1 − η₁^s)]/η₁^s + r·[N_ex^i + N_T₁^i(1 − η₁^i)]/η₁^i
//! G̃₁     = G₁·η₁₋₂          r = G̃₁^i / G̃₁^s
//! G̃₂     = G₂·η₂            Ñ_add,2 = [N_add,2 + N_T₂(1 − η₂)]/η₂
//! N_out  = G̃₃·G̃₂·G̃₁^s·(Ñ_in^s + r·Ñ_in^i + Ñ_ex) + G̃₃·G̃₂·Ñ_add,2
//! ```
//!
//! Dropping the last term gives the high-gain form fitted by
//! [`crate::calfit`]; the input-referred system noise is then Ñ_ex + ½.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{interp_linear, power_to_db, BOLTZMANN, ELEMENTARY_CHARGE, PLANCK};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("efficiency is zero at {frequency} Hz")]
    DegenerateEfficiency { frequency: f64 },
    #[error("readout chain structure: {0}")]
    Structure(String),
}

fn invalid(field: impl Into<String>, reason: impl Into<String>) -> NoiseError {
    NoiseError::Invalid {
        field: field.into(),
        reason: reason.into(),
    }
}

/// `x·coth(x / 2kT)` for an energy `x`, continuous through x = 0 and T = 0.
fn x_coth(x: f64, kt: f64) -> f64 {
    if kt <= 0.0 {
        return x.abs();
    }
    let y = x / (2.0 * kt);
    if y.abs() < 1e-4 {
        2.0 * kt * (1.0 + y * y / 3.0)
    } else {
        x / y.tanh()
    }
}

/// Thermal occupancy including the vacuum half quantum, ½·coth(hf/2k_BT).
pub fn thermal_occupancy(f: f64, temperature: f64) -> f64 {
    let hf = PLANCK * f;
    x_coth(hf, BOLTZMANN * temperature) / (2.0 * hf)
}

/// Output noise of a voltage-biased shot-noise tunnel junction (quanta at f).
///
/// `N = (1/4hf)·Σ± (eV ± hf)·coth((eV ± hf)/2k_BT)`, which tends to e|V|/(2hf)
/// at large bias and to the thermal occupancy at V = 0.
pub fn sntj_noise(v_bias: f64, f: f64, temperature: f64) -> f64 {
    let hf = PLANCK * f;
    let ev = ELEMENTARY_CHARGE * v_bias;
    let kt = BOLTZMANN * temperature;
    (x_coth(ev + hf, kt) + x_coth(ev - hf, kt)) / (4.0 * hf)
}

/// A frequency-dependent quantity: a constant or a table interpolated
/// linearly and held constant past its ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Spectrum {
    Constant(f64),
    Table { frequencies: Vec<f64>, values: Vec<f64> },
}

impl Spectrum {
    pub fn at(&self, f: f64) -> f64 {
        match self {
            Spectrum::Constant(v) => *v,
            Spectrum::Table { frequencies, values } => interp_linear(frequencies, values, f),
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            Spectrum::Constant(v) => std::slice::from_ref(v),
            Spectrum::Table { values, .. } => values,
        }
    }

    /// Checks the table shape and that every value satisfies `ok`.
    pub fn validate(&self, field: &str, ok: impl Fn(f64) -> bool, rule: &str) -> Result<(), NoiseError> {
        if let Spectrum::Table { frequencies, values } = self {
            if frequencies.is_empty() || frequencies.len() != values.len() {
                return Err(invalid(field, "table needs matching, non-empty frequency and value lists"));
            }
            if frequencies.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(invalid(field, "table frequencies must increase"));
            }
        }
        if let Some(v) = self.values().iter().find(|v| !v.is_finite() || !ok(**v)) {
            return Err(invalid(field, format!("{rule}, got {v}")));
        }
        Ok(())
    }
}

impl From<f64> for Spectrum {
    fn from(v: f64) -> Self {
        Spectrum::Constant(v)
    }
}

/// Transmission efficiency with the temperature of the bath it couples to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Efficiency {
    pub eta: Spectrum,
    pub bath_temperature: f64,
}

impl Efficiency {
    pub fn lossless() -> Self {
        Self {
            eta: Spectrum::Constant(1.0),
            bath_temperature: 0.0,
        }
    }

    pub fn validate(&self, field: &str) -> Result<(), NoiseError> {
        self.eta.validate(&format!("{field}.eta"), |v| v > 0.0 && v <= 1.0, "must lie in (0, 1]")?;
        if !(self.bath_temperature >= 0.0) || !self.bath_temperature.is_finite() {
            return Err(invalid(format!("{field}.bath_temperature"), "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplifierStage {
    /// On/off power gain (linear).
    pub gain: Spectrum,
    /// Input-referred added (excess) noise in quanta.
    pub added_noise: Spectrum,
    /// Pump-off transmission of the amplifier itself (≤ 1).
    #[serde(default = "unity")]
    pub internal_transmission: Spectrum,
}

fn unity() -> Spectrum {
    Spectrum::Constant(1.0)
}

impl AmplifierStage {
    pub fn validate(&self, field: &str) -> Result<(), NoiseError> {
        self.gain.validate(&format!("{field}.gain"), |v| v > 0.0, "must be > 0")?;
        self.added_noise.validate(&format!("{field}.added_noise"), |v| v >= 0.0, "must be >= 0")?;
        self.internal_transmission.validate(
            &format!("{field}.internal_transmission"),
            |v| v > 0.0 && v <= 1.0,
            "must lie in (0, 1]",
        )
    }

    /// On/off gain reduced by the internal transmission.
    pub fn true_gain(&self, f: f64) -> f64 {
        self.gain.at(f) * self.internal_transmission.at(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainElement {
    Efficiency(Efficiency),
    Amplifier(AmplifierStage),
}

/// Ordered chain η₁, FSA, η₂, HEMT, WAMP. The WAMP's added noise and the
/// loss in front of it are neglected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutChain {
    pub elements: Vec<ChainElement>,
}

impl ReadoutChain {
    pub fn new(
        eta1: Efficiency,
        fsa: AmplifierStage,
        eta2: Efficiency,
        hemt: AmplifierStage,
        wamp: AmplifierStage,
    ) -> Self {
        Self {
            elements: vec![
                ChainElement::Efficiency(eta1),
                ChainElement::Amplifier(fsa),
                ChainElement::Efficiency(eta2),
                ChainElement::Amplifier(hemt),
                ChainElement::Amplifier(wamp),
            ],
        }
    }

    /// A 20 dB FSA with 2.5 dB internal loss and 1.45 quanta excess noise at
    /// both signal and idler (2.9 quanta in total at unit asymmetry),
    /// a 35 dB HEMT adding 10 quanta behind 1 dB of loss at 4.5 K, and a
    /// 30 dB room-temperature amplifier. The SNTJ reference plane sits at
    /// the FSA input (η₁ = 1) at 50 mK.
    pub fn paper_defaults() -> Self {
        Self::new(
            Efficiency {
                eta: Spectrum::Constant(1.0),
                bath_temperature: 0.05,
            },
            AmplifierStage {
                gain: Spectrum::Constant(100.0),
                added_noise: Spectrum::Constant(1.45),
                internal_transmission: Spectrum::Constant(10f64.powf(-0.25)),
            },
            Efficiency {
                eta: Spectrum::Constant(10f64.powf(-0.1)),
                bath_temperature: 4.5,
            },
            AmplifierStage {
                gain: Spectrum::Constant(10f64.powf(3.5)),
                added_noise: Spectrum::Constant(10.0),
                internal_transmission: unity(),
            },
            AmplifierStage {
                gain: Spectrum::Constant(1000.0),
                added_noise: Spectrum::Constant(0.0),
                internal_transmission: unity(),
            },
        )
    }

    fn parts(&self) -> Result<(&Efficiency, &AmplifierStage, &Efficiency, &AmplifierStage, &AmplifierStage), NoiseError> {
        use ChainElement::*;
        match self.elements.as_slice() {
            [Efficiency(e1), Amplifier(a1), Efficiency(e2), Amplifier(a2), Amplifier(a3)] => Ok((e1, a1, e2, a2, a3)),
            [Efficiency(e1), Amplifier(a1), Efficiency(e2), Amplifier(a2), Efficiency(e3), Amplifier(a3)] => {
                if e3.eta != Spectrum::Constant(1.0) {
                    return Err(NoiseError::Structure(
                        "the efficiency in front of the third stage must be exactly 1".into(),
                    ));
                }
                Ok((e1, a1, e2, a2, a3))
            }
            other => Err(NoiseError::Structure(format!(
                "expected efficiency, amplifier, efficiency, amplifier, amplifier; got {}",
                other
                    .iter()
                    .map(|e| match e {
                        Efficiency(_) => "efficiency",
                        Amplifier(_) => "amplifier",
                    })
                    .collect::<Vec<_>>()
                    .join(", ")
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        let (e1, a1, e2, a2, a3) = self.parts()?;
        e1.validate("chain.eta1")?;
        a1.validate("chain.fsa")?;
        e2.validate("chain.eta2")?;
        a2.validate("chain.hemt")?;
        a3.validate("chain.wamp")
    }

    pub fn eta1(&self) -> Result<&Efficiency, NoiseError> {
        Ok(self.parts()?.0)
    }

    pub fn fsa(&self) -> Result<&AmplifierStage, NoiseError> {
        Ok(self.parts()?.1)
    }

    pub fn eta2(&self) -> Result<&Efficiency, NoiseError> {
        Ok(self.parts()?.2)
    }

    pub fn hemt(&self) -> Result<&AmplifierStage, NoiseError> {
        Ok(self.parts()?.3)
    }

    pub fn wamp(&self) -> Result<&AmplifierStage, NoiseError> {
        Ok(self.parts()?.4)
    }
}

/// Ñ = N_in·η + N_T·(1 − η).
pub fn beamsplit(n_in: f64, eff: &Efficiency, f: f64) -> f64 {
    let eta = eff.eta.at(f);
    n_in * eta + thermal_occupancy(f, eff.bath_temperature) * (1.0 - eta)
}

fn refer_back(n: f64, eff: &Efficiency, f: f64) -> Result<f64, NoiseError> {
    let eta = eff.eta.at(f);
    if !(eta > 0.0) {
        return Err(NoiseError::DegenerateEfficiency { frequency: f });
    }
    Ok((n + thermal_occupancy(f, eff.bath_temperature) * (1.0 - eta)) / eta)
}

/// FSA excess noise referred to the input of η₁, including the idler
/// contribution weighted by the gain asymmetry.
pub fn effective_excess_noise(
    eta1: &Efficiency,
    f_signal: f64,
    f_idler: f64,
    n_ex_signal: f64,
    n_ex_idler: f64,
    asymmetry: f64,
) -> Result<f64, NoiseError> {
    if !(asymmetry > 0.0) {
        return Err(invalid("asymmetry", format!("must be > 0, got {asymmetry}")));
    }
    Ok(refer_back(n_ex_signal, eta1, f_signal)? + asymmetry * refer_back(n_ex_idler, eta1, f_idler)?)
}

/// Analyzer-referred output and its parts at one signal frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainOutput {
    /// N_out at the analyzer (quanta).
    pub n_out: f64,
    /// G̃₃·G̃₂·G̃₁^s.
    pub system_gain: f64,
    /// G̃₁^i / G̃₁^s.
    pub asymmetry: f64,
    pub fsa_true_gain: f64,
    pub n_in_signal: f64,
    pub n_in_idler: f64,
    pub excess_noise: f64,
    /// Ñ_add,2 / G̃₁^s.
    pub hemt_input_referred: f64,
}

impl ChainOutput {
    /// The same output without the HEMT term.
    pub fn high_gain_limit(&self) -> f64 {
        self.system_gain * (self.n_in_signal + self.asymmetry * self.n_in_idler + self.excess_noise)
    }
}

pub fn chain_output(
    chain: &ReadoutChain,
    n_in_signal: f64,
    n_in_idler: f64,
    f_signal: f64,
    f_idler: f64,
) -> Result<ChainOutput, NoiseError> {
    let (eta1, fsa, eta2, hemt, wamp) = chain.parts()?;
    let g1s = fsa.true_gain(f_signal);
    let g1i = fsa.true_gain(f_idler);
    if !(g1s > 0.0) {
        return Err(invalid("chain.fsa.gain", format!("must be > 0 at {f_signal} Hz")));
    }
    let r = g1i / g1s;
    let n_ex = effective_excess_noise(
        eta1,
        f_signal,
        f_idler,
        fsa.added_noise.at(f_signal),
        fsa.added_noise.at(f_idler),
        r,
    )?;
    let nin_s = beamsplit(n_in_signal, eta1, f_signal);
    let nin_i = beamsplit(n_in_idler, eta1, f_idler);
    let g2 = hemt.true_gain(f_signal) * eta2.eta.at(f_signal);
    let n_add2 = refer_back(hemt.added_noise.at(f_signal), eta2, f_signal)?;
    let g3 = wamp.true_gain(f_signal);
    let n_out1 = g1s * (nin_s + r * nin_i + n_ex);
    Ok(ChainOutput {
        n_out: g3 * g2 * (n_out1 + n_add2),
        system_gain: g3 * g2 * g1s,
        asymmetry: r,
        fsa_true_gain: g1s,
        n_in_signal: nin_s,
        n_in_idler: nin_i,
        excess_noise: n_ex,
        hemt_input_referred: n_add2 / g1s,
    })
}

/// Default FSA true-gain threshold above which the HEMT term is dropped.
pub const HIGH_GAIN_THRESHOLD_DB: f64 = 16.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemNoise {
    pub frequency: f64,
    pub idler_frequency: f64,
    /// Ñ_ex + ½.
    pub limit: f64,
    /// Limit plus the input-referred HEMT term.
    pub exact: f64,
    pub excess_noise: f64,
    pub hemt_input_referred: f64,
    pub fsa_true_gain_db: f64,
    pub asymmetry: f64,
    /// False when the FSA true gain is below the threshold and the limit
    /// value should not be trusted.
    pub limit_valid: bool,
}

pub fn system_noise(
    chain: &ReadoutChain,
    f_signal: f64,
    f_idler: f64,
    threshold_db: f64,
) -> Result<SystemNoise, NoiseError> {
    let out = chain_output(chain, 0.0, 0.0, f_signal, f_idler)?;
    let limit = out.excess_noise + 0.5;
    let g_db = power_to_db(out.fsa_true_gain);
    Ok(SystemNoise {
        frequency: f_signal,
        idler_frequency: f_idler,
        limit,
        exact: limit + out.hemt_input_referred,
        excess_noise: out.excess_noise,
        hemt_input_referred: out.hemt_input_referred,
        fsa_true_gain_db: g_db,
        asymmetry: out.asymmetry,
        limit_valid: g_db >= threshold_db,
    })
}

/// System noise at each signal frequency with the idler at `f_pump − f`.
pub fn noise_budget(
    chain: &ReadoutChain,
    signal_frequencies: &[f64],
    f_pump: f64,
    threshold_db: f64,
) -> Result<Vec<SystemNoise>, NoiseError> {
    chain.validate()?;
    signal_frequencies
        .iter()
        .map(|&f| {
            let fi = f_pump - f;
            if !(fi > 0.0) {
                return Err(invalid("signal frequency", format!("{f} Hz has no idler below the pump")));
            }
            system_noise(chain, f, fi, threshold_db)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ideal_chain(g1: f64, n_ex: f64, n_add2: f64) -> ReadoutChain {
        ReadoutChain::new(
            Efficiency::lossless(),
            AmplifierStage {
                gain: g1.into(),
                added_noise: n_ex.into(),
                internal_transmission: unity(),
            },
            Efficiency::lossless(),
            AmplifierStage {
                gain: 1000.0.into(),
                added_noise: n_add2.into(),
                internal_transmission: unity(),
            },
            AmplifierStage {
                gain: 100.0.into(),
                added_noise: 0.0.into(),
                internal_transmission: unity(),
            },
        )
    }

    #[test]
    fn vacuum_limits() {
        assert_eq!(thermal_occupancy(6e9, 0.0), 0.5);
        assert_eq!(sntj_noise(0.0, 6e9, 0.0), 0.5);
    }

    #[test]
    fn occupancy_inverts_coth() {
        // coth(y) = 2 when y = atanh(1/2)
        let y = 0.5f64.atanh();
        let t = 1.0;
        let f = 2.0 * BOLTZMANN * t * y / PLANCK;
        assert!((thermal_occupancy(f, t) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn occupancy_at_6ghz_50mk() {
        let y = PLANCK * 6e9 / (2.0 * BOLTZMANN * 0.05);
        let expect = 0.5 / y.tanh();
        assert!((thermal_occupancy(6e9, 0.05) - expect).abs() < 1e-15);
        assert!((thermal_occupancy(6e9, 0.05) - 0.5032).abs() < 1e-4);
    }

    #[test]
    fn sntj_asymptote() {
        let n = sntj_noise(500e-6, 6e9, 0.0);
        let asym = ELEMENTARY_CHARGE * 500e-6 / (2.0 * PLANCK * 6e9);
        assert!((asym - 10.07).abs() < 0.01);
        assert!((n - asym).abs() / asym < 0.005);
    }

    #[test]
    fn beamsplitter_arithmetic() {
        let e = Efficiency {
            eta: 0.9.into(),
            bath_temperature: 0.0,
        };
        assert!((beamsplit(10.0, &e, 6e9) - 9.05).abs() < 1e-12);
        assert_eq!(beamsplit(3.7, &Efficiency::lossless(), 6e9), 3.7);
        let dark = Efficiency {
            eta: 1e-300.into(),
            bath_temperature: 0.0,
        };
        assert!((beamsplit(100.0, &dark, 6e9) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn excess_noise_examples() {
        let l = Efficiency::lossless();
        assert_eq!(effective_excess_noise(&l, 6e9, 4e9, 1.5, 2.0, 1.3).unwrap(), 1.5 + 1.3 * 2.0);
        let half = Efficiency {
            eta: 0.5.into(),
            bath_temperature: 0.0,
        };
        assert!((effective_excess_noise(&half, 6e9, 4e9, 0.0, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(effective_excess_noise(&l, 6e9, 4e9, 0.0, 0.0, 7.0).unwrap(), 0.0);
        let zero = Efficiency {
            eta: 0.0.into(),
            bath_temperature: 0.0,
        };
        assert!(matches!(
            effective_excess_noise(&zero, 6e9, 4e9, 0.0, 0.0, 1.0),
            Err(NoiseError::DegenerateEfficiency { .. })
        ));
        assert!(effective_excess_noise(&l, 6e9, 4e9, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn quantum_limited_output() {
        let c = ideal_chain(100.0, 0.0, 0.0);
        let out = chain_output(&c, 0.5, 0.5, 6e9, 4e9).unwrap();
        assert!((out.n_out / out.system_gain - 1.0).abs() < 1e-12);
        let s = system_noise(&c, 6e9, 4e9, HIGH_GAIN_THRESHOLD_DB).unwrap();
        assert_eq!(s.limit, 0.5);
    }

    #[test]
    fn bypassed_fsa_gives_bare_hemt_chain() {
        let mut c = ideal_chain(1.0, 0.0, 7.0);
        if let ChainElement::Amplifier(a) = &mut c.elements[1] {
            a.gain = Spectrum::Table {
                frequencies: vec![4e9, 6e9],
                values: vec![1e-15, 1.0],
            };
        }
        let out = chain_output(&c, 2.0, 2.0, 6e9, 4e9).unwrap();
        let bare = 100.0 * 1000.0 * (2.0 + 7.0);
        assert!((out.n_out - bare).abs() / bare < 1e-12);
    }

    #[test]
    fn hemt_term_is_friis_division() {
        let c = ideal_chain(56.2, 1.45, 10.0);
        let s = system_noise(&c, 6e9, 4e9, HIGH_GAIN_THRESHOLD_DB).unwrap();
        assert!((s.hemt_input_referred - 10.0 / 56.2).abs() < 1e-12);
        assert!((s.limit - 3.4).abs() < 1e-12);
        assert!((s.exact - s.limit - 10.0 / 56.2).abs() < 1e-12);
        assert!(s.limit_valid);
        let low = system_noise(&ideal_chain(10.0, 2.9, 10.0), 6e9, 4e9, HIGH_GAIN_THRESHOLD_DB).unwrap();
        assert!(!low.limit_valid);
    }

    #[test]
    fn paper_defaults_give_3_4_quanta() {
        let c = ReadoutChain::paper_defaults();
        c.validate().unwrap();
        let s = system_noise(&c, 6e9, 4e9, HIGH_GAIN_THRESHOLD_DB).unwrap();
        assert!((s.limit - 3.4).abs() < 1e-12);
        assert!((s.fsa_true_gain_db - 17.5).abs() < 1e-12);
    }

    #[test]
    fn full_and_limit_outputs_differ_by_hemt_term() {
        let c = ReadoutChain::paper_defaults();
        let out = chain_output(&c, 3.0, 3.0, 6e9, 4e9).unwrap();
        let diff = out.n_out - out.high_gain_limit();
        let expect = out.system_gain * out.hemt_input_referred;
        assert!((diff - expect).abs() / expect < 1e-12);
    }

    #[test]
    fn malformed_chain_is_a_structure_error() {
        let mut c = ReadoutChain::paper_defaults();
        c.elements.swap(0, 1);
        assert!(matches!(c.validate(), Err(NoiseError::Structure(_))));
        let mut c = ReadoutChain::paper_defaults();
        c.elements.insert(
            4,
            ChainElement::Efficiency(Efficiency {
                eta: 0.9.into(),
                bath_temperature: 300.0,
            }),
        );
        assert!(matches!(c.validate(), Err(NoiseError::Structure(_))));
        c.elements[4] = ChainElement::Efficiency(Efficiency::lossless());
        assert!(c.validate().is_ok());
    }

    #[test]
    fn chain_serde_round_trip() {
        let c = ReadoutChain::paper_defaults();
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ReadoutChain>(&s).unwrap(), c);
    }

    proptest! {
        #[test]
        fn sntj_is_even(v in -2e-3f64..2e-3, f in 1e9f64..20e9, t in 0.0f64..1.0) {
            let (a, b) = (sntj_noise(v, f, t), sntj_noise(-v, f, t));
            prop_assert!((a - b).abs() <= 1e-12 * a.abs());
        }

        #[test]
        fn sntj_at_zero_bias_is_thermal(f in 1e8f64..30e9, t in 0.0f64..5.0) {
            let (a, b) = (sntj_noise(0.0, f, t), thermal_occupancy(f, t));
            prop_assert!((a - b).abs() <= 1e-12 * b);
        }

        #[test]
        fn beamsplitters_compose(n in 0.0f64..50.0, a in 0.01f64..1.0, b in 0.01f64..1.0, t in 0.0f64..4.0) {
            let ea = Efficiency { eta: a.into(), bath_temperature: t };
            let eb = Efficiency { eta: b.into(), bath_temperature: t };
            let eab = Efficiency { eta: (a * b).into(), bath_temperature: t };
            let two = beamsplit(beamsplit(n, &ea, 6e9), &eb, 6e9);
            prop_assert!((two - beamsplit(n, &eab, 6e9)).abs() < 1e-10 * (1.0 + n));
        }

        #[test]
        fn output_is_affine_in_inputs(ns in 0.0f64..20.0, ni in 0.0f64..20.0, r in 0.05f64..5.0) {
            let mut c = ReadoutChain::paper_defaults();
            if let ChainElement::Amplifier(a) = &mut c.elements[1] {
                a.gain = Spectrum::Table { frequencies: vec![4e9, 6e9], values: vec![100.0 * r, 100.0] };
            }
            let at = |s: f64, i: f64| chain_output(&c, s, i, 6e9, 4e9).unwrap();
            let base = at(ns, ni);
            let h = 0.25;
            let ds = (at(ns + h, ni).n_out - base.n_out) / h;
            let di = (at(ns, ni + h).n_out - base.n_out) / h;
            prop_assert!((ds - base.system_gain).abs() < 1e-9 * base.system_gain);
            prop_assert!((di - base.system_gain * r).abs() < 1e-9 * base.system_gain * r);
        }

        #[test]
        fn idler_excess_raises_noise_with_asymmetry(r1 in 1.0f64..10.0, dr in 0.01f64..5.0, nex in 0.01f64..5.0) {
            let e = Efficiency { eta: 0.8.into(), bath_temperature: 0.05 };
            let a = effective_excess_noise(&e, 6e9, 4e9, 1.0, nex, r1).unwrap();
            let b = effective_excess_noise(&e, 6e9, 4e9, 1.0, nex, r1 + dr).unwrap();
            prop_assert!(b > a);
        }
    }
}

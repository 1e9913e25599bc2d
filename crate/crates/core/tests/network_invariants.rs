use kitwpa::network::io::{read_touchstone, write_touchstone};
use kitwpa::network::*;
use kitwpa::nonlinearity::FilmSpec;
use proptest::prelude::*;

fn grid(n: usize) -> FrequencyGrid {
    FrequencyGrid::linspace(1e7, 30e9, n).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn couplers_are_lossless_and_reciprocal(
        c_db in -30.0f64..-3.0,
        f0 in 5e9f64..25e9,
        len in 2e-4f64..3e-3,
        dv in 0.9f64..1.1,
    ) {
        let mut spec = CouplerSpec::for_midband_coupling(c_db, 50.0, f0, len);
        spec.effective_phase_velocity_odd *= dv;
        let s = coupler_sparams(&spec, &grid(401), 50.0).unwrap();
        prop_assert!(s.reciprocity_error() < 1e-8);
        prop_assert!(s.unitarity_error() < 1e-6);
    }

    #[test]
    fn bias_tees_are_lossless_and_reciprocal(
        c in 1e-12f64..1e-10,
        squares in 500.0f64..20000.0,
        z in 100.0f64..1500.0,
    ) {
        let spec = BiasTeeSpec {
            series_capacitance: c,
            dc_branch_squares: squares,
            dc_branch_impedance: z,
            ..BiasTeeSpec::paper_device()
        };
        let s = bias_tee_sparams(&spec, &grid(401), 50.0).unwrap();
        prop_assert!(s.reciprocity_error() < 1e-8);
        prop_assert!(s.unitarity_error() < 1e-6);
    }

    #[test]
    fn resonance_ladders_are_harmonic(squares in 1000.0f64..12000.0, z in 200.0f64..1500.0) {
        let spec = BiasTeeSpec {
            dc_branch_squares: squares,
            dc_branch_impedance: z,
            ..BiasTeeSpec::paper_device()
        };
        let branch = spec.branch_section().unwrap();
        let quarter = branch.phase_velocity() / (4.0 * branch.length);
        for term in [DcTermination::Open, DcTermination::Matched] {
            let r = dc_branch_resonances(&spec, 7.5 * quarter, term, 50.0).unwrap();
            prop_assert!(r.len() >= 2);
            for (k, f) in r.iter().enumerate() {
                // open end: f1·(2k + 1); matched end: f1·(k + 1)
                let order = match term {
                    DcTermination::Open => 2.0 * k as f64 + 1.0,
                    DcTermination::Matched => k as f64 + 1.0,
                };
                prop_assert!((f / (r[0] * order) - 1.0).abs() < 1e-6, "{term:?} {k}: {f} vs {}", r[0]);
            }
        }
    }

    #[test]
    fn abcd_sparams_round_trip(z0 in 20.0f64..300.0, len in 1e-4f64..0.05, zl in 10.0f64..1000.0) {
        let g = grid(101);
        let line = LineSection::from_impedance(zl, 3.5e-5, len).unwrap();
        let abcd = line_abcd(&line, &g);
        let back = sparams_to_abcd(&abcd_to_sparams(&abcd, z0).unwrap()).unwrap();
        for k in 0..g.len() {
            let d = (back.at(k) - abcd.at(k)).norm() / abcd.at(k).norm();
            prop_assert!(d < 1e-10, "{d}");
        }
    }

    #[test]
    fn touchstone_text_round_trips(ports in 1usize..5, seed in 0u64..1000) {
        use nalgebra::DMatrix;
        use num_complex::Complex64;
        let g = FrequencyGrid::linspace(1e9, 2e9, 5).unwrap();
        let mut x = seed as f64 + 0.5;
        let mut next = || { x = (x * 1.618_033_988_7 + 0.123).fract(); x - 0.5 };
        let mats = (0..g.len())
            .map(|_| DMatrix::from_fn(ports, ports, |_, _| Complex64::new(next(), next())))
            .collect();
        let s = NPortSParams::new(g, 50.0, mats).unwrap();
        let mut buf = Vec::new();
        write_touchstone(&s, &mut buf).unwrap();
        let back = read_touchstone(buf.as_slice(), ports).unwrap();
        prop_assert_eq!(back, s);
    }
}

#[test]
fn paper_medium_is_lossless_below_the_first_stopband() {
    let g = FrequencyGrid::linspace(1e7, 10e9, 10_001).unwrap();
    let chains = supercell_chain(&SupercellSpec::paper_device(), &FilmSpec::nbtin_10nm(), &g).unwrap();
    let s = abcd_to_sparams(&chains.medium, 50.0).unwrap();
    assert!(s.reciprocity_error() < 1e-8);
    assert!(s.unitarity_error() < 1e-6);
}

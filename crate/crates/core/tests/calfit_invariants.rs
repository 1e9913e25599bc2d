use kitwpa::calfit::*;
use kitwpa::noisechain::sntj_noise;
use kitwpa::units::PLANCK;
use proptest::prelude::*;

const F_S: f64 = 6e9;
const F_I: f64 = 4e9;
const T: f64 = 0.05;

fn paper_truth() -> FitParams {
    FitParams {
        g_sys: 1e9,
        asymmetry: 1.2,
        n_ex: 2.9,
    }
}

fn sweep(truth: FitParams, noise: f64, seed: u64) -> NoiseSweep {
    synthesize_sweep(&SyntheticSpec::symmetric(truth, 600e-6, 25, noise, seed), F_S, F_I, T).unwrap()
}

fn peak(s: &NoiseSweep) -> f64 {
    s.measured_output.iter().fold(0.0f64, |m, p| m.max(p.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scale_equivariance(c in 1e-3f64..1e3, r in 0.2f64..5.0, n in 0.1f64..8.0) {
        let truth = FitParams { g_sys: 3e8, asymmetry: r, n_ex: n };
        let s = sweep(truth, 0.0, 0);
        let mut scaled = s.clone();
        scaled.measured_output.iter_mut().for_each(|p| *p *= c);
        let a = fit_noise_sweep(&s, &FitBounds::default()).unwrap();
        let b = fit_noise_sweep(&scaled, &FitBounds::default()).unwrap();
        prop_assert!((b.g_sys / (c * a.g_sys) - 1.0).abs() < 1e-6);
        prop_assert!((b.asymmetry / a.asymmetry - 1.0).abs() < 1e-6);
        prop_assert!((b.n_ex - a.n_ex).abs() < 1e-6 * a.n_ex.max(1.0));
    }

    #[test]
    fn fitted_values_stay_inside_bounds(
        seed in 0u64..1000,
        lo in 0.01f64..1.0,
        width in 0.1f64..3.0,
        nlo in 0.0f64..3.0,
    ) {
        let bounds = FitBounds {
            asymmetry: Bound::new(lo, lo + width),
            n_ex: Bound::new(nlo, nlo + 2.0),
            ..Default::default()
        };
        let fit = fit_noise_sweep(&sweep(paper_truth(), 0.02, seed), &bounds).unwrap();
        prop_assert!(bounds.g_sys.contains(fit.g_sys));
        prop_assert!(bounds.asymmetry.contains(fit.asymmetry));
        prop_assert!(bounds.n_ex.contains(fit.n_ex));
        for s in &fit.starts {
            prop_assert!(bounds.asymmetry.contains(s.result.asymmetry) || (s.result.asymmetry - lo).abs() < 1e-9 || (s.result.asymmetry - lo - width).abs() < 1e-9);
            prop_assert!(s.result.n_ex >= nlo - 1e-9 && s.result.n_ex <= nlo + 2.0 + 1e-9);
        }
    }

    #[test]
    fn noiseless_residual_is_negligible(g_db in 60.0f64..100.0, r in 0.1f64..10.0, n in 0.0f64..20.0) {
        let truth = FitParams { g_sys: 10f64.powf(g_db / 10.0), asymmetry: r, n_ex: n };
        let s = sweep(truth, 0.0, 0);
        let fit = fit_noise_sweep(&s, &FitBounds::default()).unwrap();
        prop_assert!(fit.residual_rms < 1e-8 * peak(&s), "{} vs {}", fit.residual_rms, peak(&s));
    }
}

#[test]
fn asymptote_with_distinct_idler() {
    // far above hf/e both sidebands are linear in |V|; the idler's quanta
    // are counted at its own frequency, so its slope carries f_s/f_i
    let p = paper_truth();
    let rbw = 1e6;
    let v = 5e-3;
    let dv = 1e-4;
    let slope = (model_output(&p, v + dv, F_S, F_I, T, rbw) - model_output(&p, v, F_S, F_I, T, rbw)) / dv;
    let e = 1.602176634e-19;
    let hand = p.g_sys * (e / 2.0) * rbw * (1.0 + p.asymmetry * F_S / F_I);
    assert!((slope / hand - 1.0).abs() < 1e-9);
    let direct = p.g_sys * PLANCK * F_S * rbw * (sntj_noise(v, F_S, T) + p.asymmetry * sntj_noise(v, F_I, T) + p.n_ex);
    assert!((model_output(&p, v, F_S, F_I, T, rbw) / direct - 1.0).abs() < 1e-14);
}

#[test]
fn one_sigma_coverage_is_reasonable() {
    let truth = paper_truth();
    let mut inside = [0usize; 3];
    let n = 100;
    for seed in 0..n {
        let fit = fit_noise_sweep(&sweep(truth, 0.01, seed), &FitBounds::default()).unwrap();
        let sigma = fit.sigma().unwrap();
        for (k, (got, want)) in [(fit.g_sys, truth.g_sys), (fit.asymmetry, truth.asymmetry), (fit.n_ex, truth.n_ex)]
            .into_iter()
            .enumerate()
        {
            if (got - want).abs() <= sigma[k] {
                inside[k] += 1;
            }
        }
    }
    for k in inside {
        assert!((50..=100).contains(&k), "coverage {inside:?}");
    }
}

#[test]
fn unconstrained_asymmetry_runs_off_to_the_edge() {
    let wide = FitBounds {
        asymmetry: Bound::new(-2.0, 100.0),
        ..Default::default()
    };
    let mut hits = 0;
    for seed in 0..20 {
        let fit = fit_noise_sweep(&sweep(paper_truth(), 0.01, seed), &wide).unwrap();
        hits += fit
            .starts
            .iter()
            .filter(|s| s.result.asymmetry < 0.0 || s.result.asymmetry > 99.0 || s.result.n_ex < 1e-6)
            .count();
    }
    assert!(hits > 0);
}

#[test]
fn sweep_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let s = sweep(paper_truth(), 0.01, 4);
    write_sweep(&s, &path).unwrap();
    assert!(sidecar_path(&path).exists());
    assert_eq!(read_sweep(&path).unwrap(), s);
}

#[test]
fn fit_result_json_round_trip() {
    let fit = fit_noise_sweep(&sweep(paper_truth(), 0.01, 2), &FitBounds::default()).unwrap();
    let text = serde_json::to_string(&fit).unwrap();
    let back: FitResult = serde_json::from_str(&text).unwrap();
    assert_eq!(back, fit);
}

#[test]
fn single_sweep_band_median_is_that_point() {
    let s = sweep(paper_truth(), 0.01, 9);
    let one = fit_noise_sweep(&s, &FitBounds::default()).unwrap();
    let band = fit_band(std::slice::from_ref(&s), &FitBounds::default(), (1e9, 10e9), None).unwrap();
    assert_eq!(band.median_n_sys, Some(one.n_sys));
}

#[test]
fn all_starts_failing_is_an_error_with_diagnostics() {
    let mut s = sweep(paper_truth(), 0.0, 0);
    s.measured_output.iter_mut().for_each(|p| *p = -*p);
    match fit_noise_sweep(&s, &FitBounds::default()) {
        Ok(fit) => assert!(fit.at_bound.g_sys || fit.at_bound.n_ex || fit.at_bound.asymmetry),
        Err(CalfitError::NoConvergence { starts }) => assert!(starts.len() >= 3),
        Err(e) => panic!("{e}"),
    }
}

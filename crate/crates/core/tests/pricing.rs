use rand::Rng;

use klmc_core::golden::{golden_params, golden_record, golden_spec, GOLDEN_SEED};
use klmc_core::pricing::{
    asian_payoff, geometric_asian_closed_form, price_baseline, price_geometric_mc, price_kl_nested,
    price_subsample, InnerMode, KlNestedConfig, Method,
};
use klmc_core::process::{path_value, sample_coefficients, DEFAULT_CLIP};
use klmc_core::{AsianPayoffSpec, GbmParams, StreamFamily, TimeGrid, WienerCoefficients};

fn market() -> GbmParams {
    GbmParams::new(100.0, 0.05, 0.2).unwrap()
}

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

#[test]
fn payoff_is_lipschitz_in_the_weighted_path() {
    let mut rng = StreamFamily::new(1, "pricing-it").stream(0);
    let spec = AsianPayoffSpec::with_weights(100.0, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(50.0..150.0)).collect();
        let y: Vec<f64> = (0..4).map(|_| rng.random_range(50.0..150.0)).collect();
        let lhs = (asian_payoff(&x, &spec).unwrap() - asian_payoff(&y, &spec).unwrap()).abs();
        let rhs: f64 = spec.weights().iter().zip(x.iter().zip(&y)).map(|(w, (a, b))| w * (a - b).abs()).sum();
        // Exact in real arithmetic; allow a few ulps of the summed magnitudes.
        let scale: f64 = spec.weights().iter().zip(x.iter().zip(&y)).map(|(w, (a, b))| w * (a + b)).sum();
        assert!(lhs <= rhs + 8.0 * f64::EPSILON * scale, "{lhs} > {rhs}");
    }
}

#[test]
fn payoff_mse_is_bounded_by_worst_path_mse() {
    // Truncated and reference KL paths share their leading coefficients.
    let p = market();
    let (l, l_ref, dates) = (8, 1024, 16);
    let spec = AsianPayoffSpec::uniform(100.0, dates).unwrap();
    let fam = StreamFamily::new(2, "pricing-it");
    let n = 20_000;
    let mut path_se = vec![0.0; dates];
    let mut payoff_se = 0.0;
    for i in 0..n {
        let (full, _) = sample_coefficients(&mut fam.stream(i), l_ref, DEFAULT_CLIP).unwrap();
        let short = WienerCoefficients::new(full.as_slice()[..=l].to_vec(), DEFAULT_CLIP).unwrap();
        let t = |k: usize| (k + 1) as f64 / dates as f64;
        let x: Vec<f64> = (0..dates).map(|k| path_value(&short, t(k), &p)).collect();
        let y: Vec<f64> = (0..dates).map(|k| path_value(&full, t(k), &p)).collect();
        for k in 0..dates {
            path_se[k] += (x[k] - y[k]).powi(2);
        }
        payoff_se += (asian_payoff(&x, &spec).unwrap() - asian_payoff(&y, &spec).unwrap()).powi(2);
    }
    let worst = path_se.iter().cloned().fold(0.0, f64::max) / n as f64;
    let payoff = payoff_se / n as f64;
    assert!(payoff > 0.0);
    assert!(payoff <= worst * 1.05, "{payoff} vs {worst}");
}

#[test]
fn subsample_on_the_monitoring_grid_matches_baseline() {
    // ε = 0.125 gives M = 64 = T, so both estimators target the same price.
    let p = market();
    let spec = AsianPayoffSpec::uniform(100.0, 64).unwrap();
    let base = price_baseline(&p, &spec, 200_000, 3).unwrap();
    let sub = price_subsample(&p, &spec, 0.125, 200_000, 4).unwrap();
    assert_eq!(sub.method, Method::Subsample);
    assert!((base.value - sub.value).abs() <= 3.0 * combined(base.std_error, sub.std_error));
}

#[test]
fn subsample_agrees_with_golden_within_epsilon_allowance() {
    let golden = golden_record().unwrap();
    let eps = 0.05;
    let sub = price_subsample(&golden_params(), &golden_spec(), eps, 200_000, 5).unwrap();
    let tol = 3.0 * combined(golden.std_error, sub.std_error) + 3.0 * eps;
    assert!((sub.value - golden.value).abs() <= tol, "{} vs {}", sub.value, golden.value);
}

#[test]
fn geometric_closed_form_matches_brute_force() {
    let p = market();
    let grid = TimeGrid::uniform_monitoring(16).unwrap();
    for strike in [90.0, 100.0, 110.0] {
        let cf = geometric_asian_closed_form(&p, &grid, strike).unwrap();
        let mc = price_geometric_mc(&p, &grid, strike, 1_000_000, 6).unwrap();
        assert!((mc.value - cf).abs() <= 3.0 * mc.std_error, "K={strike}: {cf} vs {}", mc.value);
    }
}

#[test]
fn nested_error_shrinks_with_inner_samples() {
    // Common coefficient draws across M1; the inner estimator's noise is the
    // only thing that changes, so the outer variance must fall with M1.
    let p = market();
    let spec = AsianPayoffSpec::uniform(100.0, 64).unwrap();
    let m0 = 20_000;
    let run = |m1: u64| {
        let mut cfg = KlNestedConfig::new(0.1, m0, m1);
        cfg.truncation = Some(21);
        price_kl_nested(&p, &spec, &cfg, 7).unwrap()
    };
    let reference = run(4096);
    let runs: Vec<_> = [16, 64, 256].into_iter().map(run).collect();
    let mse: Vec<f64> = runs
        .iter()
        .map(|e| (e.value - reference.value).powi(2) + e.std_error.powi(2))
        .collect();
    for w in runs.windows(2) {
        // Standard errors are estimated from 2·10⁴ paths, so their relative
        // error is below 1%; a 3σ gap is far smaller than the observed drop.
        assert!(w[1].std_error * 1.03 < w[0].std_error, "{} !< {}", w[1].std_error, w[0].std_error);
    }
    for w in mse.windows(2) {
        assert!(w[1] < w[0], "{mse:?}");
    }
}

#[test]
fn nested_inner_modes_estimate_the_same_price() {
    let p = market();
    let spec = AsianPayoffSpec::uniform(100.0, 64).unwrap();
    let mut cfg = KlNestedConfig::new(0.1, 20_000, 256);
    let rate = price_kl_nested(&p, &spec, &cfg, 8).unwrap();
    cfg.inner = InnerMode::UniformAverage;
    let uniform = price_kl_nested(&p, &spec, &cfg, 8).unwrap();
    // Both are noisy, nonlinear-in-the-inner-mean estimators of the same
    // continuous price; their inner noise is O(1/M1) in bias.
    assert!((rate.value - uniform.value).abs() <= 3.0 * combined(rate.std_error, uniform.std_error) + 0.2);
}

#[test]
fn golden_record_matches_its_constants() {
    let g = golden_record().unwrap();
    assert_eq!(g.seed, GOLDEN_SEED);
    assert_eq!((g.s0, g.mu, g.sigma, g.strike), (100.0, 0.05, 0.2, 100.0));
    assert_eq!(g.monitoring, 64);
    assert!(g.std_error > 0.0 && g.std_error < 0.01);
}

#[test]
fn estimates_are_reproducible() {
    let p = market();
    let spec = AsianPayoffSpec::uniform(100.0, 16).unwrap();
    assert_eq!(price_baseline(&p, &spec, 5_000, 9).unwrap(), price_baseline(&p, &spec, 5_000, 9).unwrap());
    let cfg = KlNestedConfig::new(0.2, 500, 32);
    assert_eq!(
        price_kl_nested(&p, &spec, &cfg, 9).unwrap(),
        price_kl_nested(&p, &spec, &cfg, 9).unwrap()
    );
    assert_ne!(price_baseline(&p, &spec, 5_000, 9).unwrap().value, price_baseline(&p, &spec, 5_000, 10).unwrap().value);
}

#[test]
fn invalid_inputs_are_validation_errors() {
    let p = market();
    let spec = AsianPayoffSpec::uniform(100.0, 16).unwrap();
    assert!(price_baseline(&p, &spec, 1, 0).unwrap_err().is_validation());
    assert!(price_subsample(&p, &spec, 0.0, 10, 0).unwrap_err().is_validation());
    assert!(price_subsample(&p, &spec, 1e-5, 10, 0).unwrap_err().is_validation());
    let weighted = AsianPayoffSpec::with_weights(100.0, vec![0.25, 0.75]).unwrap();
    assert!(price_kl_nested(&p, &weighted, &KlNestedConfig::new(0.1, 10, 10), 0).unwrap_err().is_validation());
    assert!(asian_payoff(&[1.0, 2.0], &spec).unwrap_err().is_validation());
}

#[test]
fn method_names_match_the_cli() {
    for m in [
        Method::Baseline,
        Method::KlNested,
        Method::Subsample,
        Method::GeometricClosedForm,
        Method::GeometricMonteCarlo,
        Method::QsimCheck,
    ] {
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, format!("\"{m}\""));
        assert_eq!(serde_json::from_str::<Method>(&json).unwrap(), m);
    }
}

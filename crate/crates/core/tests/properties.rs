use proptest::prelude::*;

use klmc_core::klcore::{
    eigenfunction_lipschitz, kl_eigenvalue, kl_tail_variance, truncation_index_bm, wiener_eval,
    wiener_eval_horner,
};
use klmc_core::pricing::asian_payoff;
use klmc_core::process::{g_max_bound, gbm_from_bm, path_value, sample_coefficients};
use klmc_core::stats::Accumulator;
use klmc_core::{AsianPayoffSpec, GbmParams, StreamFamily, TimeGrid, WienerCoefficients};

fn coefficients(max_l: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, 1..=max_l + 1)
}

proptest! {
    #[test]
    fn horner_agrees_with_direct(a in coefficients(512), t in 0.0f64..=1.0) {
        let c = WienerCoefficients::new(a, 10.0).unwrap();
        let (h, d) = (wiener_eval_horner(&c, t), wiener_eval(&c, t));
        prop_assert!((h - d).abs() / (1.0 + d.abs()) < 1e-9);
    }

    #[test]
    fn boundary_identities(a in coefficients(256)) {
        let a0 = a[0];
        let c = WienerCoefficients::new(a, 10.0).unwrap();
        prop_assert_eq!(wiener_eval(&c, 0.0), 0.0);
        prop_assert_eq!(wiener_eval_horner(&c, 0.0), 0.0);
        prop_assert_eq!(wiener_eval(&c, 1.0), a0);
        prop_assert_eq!(wiener_eval_horner(&c, 1.0), a0);
    }

    #[test]
    fn mercer_constant_is_two(k in 1usize..100_000) {
        let g = eigenfunction_lipschitz(k).unwrap();
        prop_assert!((kl_eigenvalue(k).unwrap() * g * g - 2.0).abs() < 1e-12);
        prop_assert!(kl_eigenvalue(k + 1).unwrap() < kl_eigenvalue(k).unwrap());
    }

    #[test]
    fn truncation_index_is_minimal(eps in 0.02f64..1.0) {
        let l = truncation_index_bm(eps).unwrap();
        prop_assert!(kl_tail_variance(l) <= eps * eps);
        if l > 1 {
            prop_assert!(kl_tail_variance(l - 1) > eps * eps);
        }
    }

    #[test]
    fn payoff_is_monotone_and_nonnegative(
        path in prop::collection::vec(0.0f64..300.0, 1..32),
        bump in 0.0f64..50.0,
        strike in 0.0f64..200.0,
    ) {
        let spec = AsianPayoffSpec::uniform(strike, path.len()).unwrap();
        let base = asian_payoff(&path, &spec).unwrap();
        let higher: Vec<f64> = path.iter().map(|s| s + bump).collect();
        prop_assert!(base >= 0.0);
        prop_assert!(asian_payoff(&higher, &spec).unwrap() >= base);
    }

    #[test]
    fn gbm_is_positive_and_increasing_in_b(
        b in -20.0f64..20.0, db in 0.0f64..5.0, t in 0.0f64..=1.0,
        mu in -0.5f64..0.5, sigma in 0.01f64..1.0,
    ) {
        let p = GbmParams::new(100.0, mu, sigma).unwrap();
        let lo = gbm_from_bm(b, t, &p);
        prop_assert!(lo > 0.0);
        prop_assert!(gbm_from_bm(b + db, t, &p) >= lo);
    }

    #[test]
    fn global_bound_dominates_paths(seed in any::<u64>(), l in 0usize..64, t in 0.0f64..=1.0) {
        let p = GbmParams::new(100.0, 0.05, 0.3).unwrap();
        let (c, _) = sample_coefficients(&mut StreamFamily::new(seed, "prop").stream(0), l, 8.0).unwrap();
        prop_assert!(path_value(&c, t, &p) <= g_max_bound(&p, l, 8.0).unwrap().value);
    }

    #[test]
    fn accumulator_merge_matches_sequential(xs in prop::collection::vec(-1e3f64..1e3, 2..200), cut in 0usize..200) {
        let cut = cut.min(xs.len());
        let all: Accumulator = xs.iter().copied().collect();
        let mut left: Accumulator = xs[..cut].iter().copied().collect();
        left.merge(&xs[cut..].iter().copied().collect());
        prop_assert_eq!(left.count, all.count);
        prop_assert!((left.mean - all.mean).abs() <= 1e-9 * (1.0 + all.mean.abs()));
        prop_assert!((left.variance() - all.variance()).abs() <= 1e-9 * (1.0 + all.variance()));
    }

    #[test]
    fn subsample_grid_is_uniform(m in 1usize..2_000) {
        let g = TimeGrid::subsample(m).unwrap();
        prop_assert_eq!(g.len(), m + 1);
        prop_assert_eq!(g.points()[0], 0.0);
        prop_assert_eq!(g.points()[m], 1.0);
        prop_assert!(g.points().windows(2).all(|w| w[0] < w[1]));
    }
}

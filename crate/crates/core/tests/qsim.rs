use klmc_core::process::{g_max_bound, path_value};
use klmc_core::qsim::{
    attach_value_rotation, build_quantized_subsample_state, build_semidigital_state,
    classical_semidigital_mean, classical_subsample_payoff, exact_success_probability,
    gaussian_grid_value, mle_amplitude_estimate, prepare_gaussian_register, proportion_estimate,
    subsample_gmax_bound, AncillaPattern, FixedPointCodec, RegisterLayout, MAX_QUBITS,
};
use klmc_core::stats::Accumulator;
use klmc_core::{Error, GbmParams, StreamFamily, WienerCoefficients};

const CLIP: f64 = 4.0;

fn market() -> GbmParams {
    GbmParams::new(100.0, 0.05, 0.2).unwrap()
}

fn semidigital(n: usize, l: usize, t: usize, bits: usize) -> (RegisterLayout, FixedPointCodec, f64) {
    let layout = RegisterLayout::new(n, l + 1, RegisterLayout::time_width(t), bits, 0).unwrap();
    let gmax = g_max_bound(&market(), l, CLIP).unwrap().value;
    (layout, FixedPointCodec::for_range(bits, gmax).unwrap(), gmax)
}

#[test]
fn value_register_is_the_classical_path_value() {
    let p = market();
    let (n, l, t) = (2, 1, 4);
    let (layout, codec, _) = semidigital(n, l, t, 8);
    let state = build_semidigital_state(&layout, &p, l, t, CLIP, &codec).unwrap();
    let mut nonzero = 0;
    for (i, amp) in state.amplitudes().iter().enumerate() {
        let f = layout.decode(i);
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        nonzero += 1;
        let a: Vec<f64> = f.coeffs.iter().map(|&c| gaussian_grid_value(c, n, CLIP)).collect();
        let coeffs = WienerCoefficients::new(a, CLIP).unwrap();
        let g = path_value(&coeffs, (f.time + 1) as f64 / t as f64, &p);
        assert_eq!(f.value, codec.encode(g).code, "basis {i}");
    }
    assert_eq!(nonzero, (1 << (n * (l + 1))) * t);
}

#[test]
fn constructions_preserve_norm() {
    let p = market();
    for (n, l, t) in [(1, 0, 1), (2, 1, 4), (3, 1, 3), (2, 2, 2)] {
        let (layout, codec, gmax) = semidigital(n, l, t, 6);
        let state = build_semidigital_state(&layout, &p, l, t, CLIP, &codec).unwrap();
        state.check_norm(1e-12).unwrap();
        let rotated = attach_value_rotation(&state, gmax).unwrap();
        rotated.check_norm(1e-12).unwrap();
        let p0 = exact_success_probability(&rotated, AncillaPattern::single(0, false)).unwrap();
        let p1 = exact_success_probability(&rotated, AncillaPattern::single(0, true)).unwrap();
        assert!((p0 + p1 - 1.0).abs() < 1e-12);
        let all = exact_success_probability(&rotated, AncillaPattern { mask: 0, value: 0 }).unwrap();
        assert!((all - 1.0).abs() < 1e-12);
    }
}

#[test]
fn rotation_success_is_the_quantized_classical_mean() {
    let p = market();
    let (n, l, t) = (3, 0, 2);
    let (layout, codec, gmax) = semidigital(n, l, t, 10);
    let state = build_semidigital_state(&layout, &p, l, t, CLIP, &codec).unwrap();
    let rotated = attach_value_rotation(&state, gmax).unwrap();
    let success = exact_success_probability(&rotated, AncillaPattern::single(0, false)).unwrap();
    let quantized = classical_semidigital_mean(&p, l, t, n, CLIP, None, Some(&codec)).unwrap();
    let raw = classical_semidigital_mean(&p, l, t, n, CLIP, None, None).unwrap();
    assert!((success * gmax - quantized).abs() < 1e-10);
    assert!((success * gmax - raw).abs() <= codec.scale / 2.0);
}

#[test]
fn subsample_state_limits() {
    let p = market();
    let (n, m, bits) = (2, 3, 8);
    let layout = RegisterLayout::new(n, m, 0, bits, 1).unwrap();
    let gmax = subsample_gmax_bound(&p, m, CLIP);
    let codec = FixedPointCodec::for_range(bits, gmax).unwrap();
    let zero = AncillaPattern::single(0, false);

    let out_of_money = build_quantized_subsample_state(&layout, &p, m, gmax, gmax, CLIP, &codec).unwrap();
    assert_eq!(exact_success_probability(&out_of_money, zero).unwrap(), 0.0);

    // σ → 0 with K = 0: the payoff is the Riemann mean of s0 e^{μt}.
    let flat = GbmParams::new(100.0, 0.05, 1e-12).unwrap();
    let state = build_quantized_subsample_state(&layout, &flat, m, 0.0, gmax, CLIP, &codec).unwrap();
    let riemann = (1..=m).map(|i| 100.0 * (0.05 * i as f64 / m as f64).exp()).sum::<f64>() / m as f64;
    let got = exact_success_probability(&state, zero).unwrap() * gmax;
    assert!((got - riemann).abs() <= codec.scale / 2.0 + 1e-9);

    let state = build_quantized_subsample_state(&layout, &p, m, 100.0, gmax, CLIP, &codec).unwrap();
    state.check_norm(1e-12).unwrap();
    let got = exact_success_probability(&state, zero).unwrap() * gmax;
    let enumerated = classical_subsample_payoff(&p, m, n, CLIP, 100.0, Some(&codec)).unwrap();
    assert!((got - enumerated).abs() < 1e-10);
}

#[test]
fn gaussian_register_is_a_unit_variance_pmf() {
    let amps = prepare_gaussian_register(6, 8.0).unwrap();
    let probs: Vec<f64> = amps.iter().map(|a| a * a).collect();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    let var: f64 = probs.iter().enumerate().map(|(c, q)| q * gaussian_grid_value(c, 6, 8.0).powi(2)).sum();
    assert!((var - 1.0).abs() < 0.02);
    for c in 1..32 {
        assert!((probs[32 - c] - probs[32 + c]).abs() < 1e-16);
    }
    assert!(prepare_gaussian_register(9, 8.0).is_err());
}

#[test]
fn oversized_layout_hits_the_resource_guard() {
    let err = RegisterLayout::new(4, 6, 2, 8, 1).unwrap_err();
    assert!(matches!(err, Error::ResourceGuard(_)));
    assert!(err.is_validation());
    assert!(RegisterLayout::new(2, 2, 2, MAX_QUBITS - 6, 0).is_ok());
}

#[test]
fn amplitude_estimators_at_the_extremes_and_depth_zero() {
    let fam = StreamFamily::new(3, "qsim-it");
    let depths = [0, 1, 2, 4, 8];
    assert_eq!(mle_amplitude_estimate(0.0, 50, &depths, &mut fam.stream(0)).unwrap(), 0.0);
    assert!((mle_amplitude_estimate(1.0, 50, &depths, &mut fam.stream(1)).unwrap() - 1.0).abs() < 1e-9);

    // Depth {0} is the proportion estimator, hence unbiased.
    let acc: Accumulator = (0..400)
        .map(|i| mle_amplitude_estimate(0.3, 200, &[0], &mut fam.stream(10 + i)).unwrap())
        .collect();
    assert!((acc.mean - 0.3).abs() <= 3.0 * acc.std_error());
    let same_law: Accumulator =
        (0..400).map(|i| proportion_estimate(0.3, 200, &mut fam.stream(1000 + i)).unwrap()).collect();
    assert!((acc.variance() / same_law.variance() - 1.0).abs() < 0.3);
}

#[test]
fn probability_dump_lists_nonzero_basis_states() {
    let (layout, codec, _) = semidigital(1, 0, 2, 4);
    let state = build_semidigital_state(&layout, &market(), 0, 2, CLIP, &codec).unwrap();
    let mut buf = Vec::new();
    state.write_probabilities_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("basis,coeff_codes,time"));
    assert_eq!(lines.len(), 1 + 2 * 2);
}

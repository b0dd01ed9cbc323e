use num_complex::Complex64;
use rayon::prelude::*;

use super::codec::FixedPointCodec;
use super::layout::{BasisFields, RegisterLayout};
use super::state::StateVector;
use crate::error::{Error, Result};
use crate::klcore::WienerCoefficients;
use crate::process::{path_value, GbmParams};

/// Tolerance for decoded values sitting exactly on `gmax`.
const GMAX_SLACK: f64 = 1e-12;

/// Grid value `v = 2Ax/N` of register code `c`, where `x = c − N/2`.
pub fn gaussian_grid_value(code: usize, n: usize, clip: f64) -> f64 {
    let big_n = (1usize << n) as f64;
    let x = code as f64 - big_n / 2.0;
    2.0 * clip * x / big_n
}

/// Amplitudes `∝ exp(−v²/4)` over the `2ⁿ` grid points, so that the
/// probabilities form a unit-variance Gaussian pmf renormalized on the grid.
pub fn prepare_gaussian_register(n: usize, clip: f64) -> Result<Vec<f64>> {
    if !(1..=8).contains(&n) {
        return Err(Error::invalid("n", n as f64, "register width must lie in [1, 8]"));
    }
    if !(clip > 0.0 && clip.is_finite()) {
        return Err(Error::invalid("A", clip, "must be positive and finite"));
    }
    let raw: Vec<f64> = (0..1usize << n)
        .map(|c| (-gaussian_grid_value(c, n, clip).powi(2) / 4.0).exp())
        .collect();
    let norm = raw.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(raw.into_iter().map(|a| a / norm).collect())
}

/// `(amplitude, decoded coefficients)` for every joint code of `regs`
/// registers of width `n`, indexed by joint code.
fn coefficient_branches(n: usize, regs: usize, clip: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    let amps = prepare_gaussian_register(n, clip)?;
    let mask = (1usize << n) - 1;
    Ok((0..1usize << (n * regs))
        .map(|code| {
            let mut amp = 1.0;
            let vals = (0..regs)
                .map(|r| {
                    let c = (code >> (r * n)) & mask;
                    amp *= amps[c];
                    gaussian_grid_value(c, n, clip)
                })
                .collect();
            (amp, vals)
        })
        .collect())
}

fn quantize(codec: Option<&FixedPointCodec>, v: f64) -> f64 {
    codec.map_or(v, |c| c.decode(c.encode(v).code))
}

fn semidigital_values(params: &GbmParams, a: &[f64], clip: f64, monitoring: usize) -> Vec<f64> {
    let coeffs = WienerCoefficients::from_clamped(a.to_vec(), clip);
    (0..monitoring)
        .map(|tau| path_value(&coeffs, (tau + 1) as f64 / monitoring as f64, params))
        .collect()
}

/// `Σ_a √p(a)|a⟩ ⊗ (1/√T) Σ_τ |τ⟩|encode(G_L(a′, (τ+1)/T))⟩` where `a′` are the
/// decoded grid values of the coefficient registers.
pub fn build_semidigital_state(
    layout: &RegisterLayout,
    params: &GbmParams,
    l: usize,
    monitoring: usize,
    clip: f64,
    codec: &FixedPointCodec,
) -> Result<StateVector> {
    if layout.n_coeff_registers != l + 1 {
        return Err(Error::LengthMismatch {
            what: "coefficient registers",
            expected: l + 1,
            actual: layout.n_coeff_registers,
        });
    }
    if monitoring == 0 || layout.time_qubits != RegisterLayout::time_width(monitoring) {
        return Err(Error::invalid("T", monitoring as f64, "time register must have width ceil(log2 T)"));
    }
    if layout.value_qubits != codec.bits || layout.ancilla_count != 0 {
        return Err(Error::invalid("value_qubits", layout.value_qubits as f64, "value register must match the codec"));
    }
    let branches = coefficient_branches(layout.coeff_qubits, l + 1, clip)?;
    let norm_t = 1.0 / (monitoring as f64).sqrt();
    let entries: Vec<(Vec<(usize, f64)>, u64)> = branches
        .par_iter()
        .enumerate()
        .map(|(code, (amp, a))| {
            let mut sats = 0;
            let cells = semidigital_values(params, a, clip, monitoring)
                .into_iter()
                .enumerate()
                .map(|(tau, g)| {
                    let e = codec.encode(g);
                    sats += e.saturated as u64;
                    let f = BasisFields {
                        coeffs: split_code(code, layout.coeff_qubits, l + 1),
                        time: tau,
                        value: e.code,
                        ancillas: 0,
                    };
                    (layout.encode(&f), amp * norm_t)
                })
                .collect();
            (cells, sats)
        })
        .collect();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.dim()];
    let mut saturations = 0;
    for (cells, sats) in entries {
        saturations += sats;
        for (idx, a) in cells {
            amplitudes[idx] = Complex64::new(a, 0.0);
        }
    }
    Ok(StateVector::from_parts(amplitudes, *layout, *codec, saturations))
}

fn split_code(code: usize, n: usize, regs: usize) -> Vec<usize> {
    (0..regs).map(|r| (code >> (r * n)) & ((1usize << n) - 1)).collect()
}

/// Appends one ancilla above all other qubits and rotates it so the `|0⟩`
/// branch carries amplitude `√(v/gmax)` for decoded value `v`.
pub fn attach_value_rotation(state: &StateVector, gmax: f64) -> Result<StateVector> {
    if !(gmax > 0.0 && gmax.is_finite()) {
        return Err(Error::invalid("gmax", gmax, "must be positive and finite"));
    }
    let old = *state.layout();
    let layout = old.with_extra_ancillas(1)?;
    let top = 1usize << old.total_qubits();
    let codec = *state.codec();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.dim()];
    for (i, a) in state.amplitudes().iter().enumerate() {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        let v = codec.decode(old.decode(i).value);
        if v > gmax * (1.0 + GMAX_SLACK) {
            return Err(Error::BoundViolated { value: v, bound: gmax });
        }
        let r = (v / gmax).clamp(0.0, 1.0);
        amplitudes[i] = a * r.sqrt();
        amplitudes[i | top] = a * (1.0 - r).sqrt();
    }
    Ok(StateVector::from_parts(amplitudes, layout, codec, state.saturations()))
}

/// Exact outcome of nesting amplitude estimation inside an outer payoff
/// rotation, computed from `state`.
///
/// For each coefficient branch the conditional probability of ancilla bit
/// `rotation_bit` reading `|0⟩` gives `Ḡ(a) = gmax · p(0|a)`. Returns
/// `Σ_a p(a) (Ḡ(a) − K)⁺ / payoff_norm`.
pub fn nested_payoff_probability(
    state: &StateVector,
    rotation_bit: usize,
    gmax: f64,
    strike: f64,
    payoff_norm: f64,
) -> Result<f64> {
    let layout = state.layout();
    if rotation_bit >= layout.ancilla_count {
        return Err(Error::invalid("rotation_bit", rotation_bit as f64, "no such ancilla"));
    }
    let blocks = 1usize << layout.coeff_width();
    let mut mass = vec![0.0; blocks];
    let mut success = vec![0.0; blocks];
    for (i, a) in state.amplitudes().iter().enumerate() {
        let p = a.norm_sqr();
        let b = layout.coeff_block(i);
        mass[b] += p;
        if (layout.decode(i).ancillas >> rotation_bit) & 1 == 0 {
            success[b] += p;
        }
    }
    let mut total = 0.0;
    for (m, s) in mass.iter().zip(&success) {
        if *m == 0.0 {
            continue;
        }
        let payoff = (gmax * s / m - strike).max(0.0);
        if payoff > payoff_norm * (1.0 + GMAX_SLACK) {
            return Err(Error::BoundViolated { value: payoff, bound: payoff_norm });
        }
        total += m * payoff / payoff_norm;
    }
    Ok(total)
}

/// Classical enumeration of `E_a[f((1/T) Σ_τ G(a′, t_τ))]` over the same
/// coefficient grid, with values optionally passed through `codec`. The
/// function `f` is the identity for `strike = None`, else `(· − K)⁺`.
pub fn classical_semidigital_mean(
    params: &GbmParams,
    l: usize,
    monitoring: usize,
    n: usize,
    clip: f64,
    strike: Option<f64>,
    codec: Option<&FixedPointCodec>,
) -> Result<f64> {
    let branches = coefficient_branches(n, l + 1, clip)?;
    Ok(branches
        .par_iter()
        .map(|(amp, a)| {
            let mean = semidigital_values(params, a, clip, monitoring)
                .into_iter()
                .map(|g| quantize(codec, g))
                .sum::<f64>()
                / monitoring as f64;
            let f = strike.map_or(mean, |k| (mean - k).max(0.0));
            amp * amp * f
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum())
}

/// `s0 · exp(σ√M A + max(μ − σ²/2, 0))`, which dominates `Ḡ(a)` when every
/// increment code decodes into `[−A, A]`.
pub fn subsample_gmax_bound(params: &GbmParams, m: usize, clip: f64) -> f64 {
    params.s0 * (params.sigma * (m as f64).sqrt() * clip + params.effective_drift().max(0.0)).exp()
}

/// `Ḡ(a) = (1/M) Σ_{i=1..M} s0 exp(σB(i/M) + (μ − σ²/2) i/M)` with
/// `B(i/M) = (1/√M) Σ_{m≤i} a_m`.
fn subsample_mean(params: &GbmParams, a: &[f64]) -> f64 {
    let m = a.len() as f64;
    let mut b = 0.0;
    a.iter()
        .enumerate()
        .map(|(i, ai)| {
            b += ai / m.sqrt();
            let t = (i + 1) as f64 / m;
            params.s0 * (params.sigma * b + params.effective_drift() * t).exp()
        })
        .sum::<f64>()
        / m
}

/// `Σ_a √p(a)|a⟩|encode((Ḡ(a) − K)⁺)⟩(√(v/gmax)|0⟩ + √(1 − v/gmax)|1⟩)` over
/// `M` increment registers, `v` being the decoded payoff.
pub fn build_quantized_subsample_state(
    layout: &RegisterLayout,
    params: &GbmParams,
    m: usize,
    strike: f64,
    gmax: f64,
    clip: f64,
    codec: &FixedPointCodec,
) -> Result<StateVector> {
    if m == 0 || layout.n_coeff_registers != m {
        return Err(Error::LengthMismatch {
            what: "increment registers",
            expected: m,
            actual: layout.n_coeff_registers,
        });
    }
    if layout.time_qubits != 0 || layout.value_qubits != codec.bits || layout.ancilla_count != 1 {
        return Err(Error::invalid(
            "layout",
            layout.total_qubits() as f64,
            "need no time register, a codec-width value register and one ancilla",
        ));
    }
    if !(gmax > 0.0 && gmax.is_finite()) {
        return Err(Error::invalid("gmax", gmax, "must be positive and finite"));
    }
    let branches = coefficient_branches(layout.coeff_qubits, m, clip)?;
    let top = 1usize << (layout.total_qubits() - 1);
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); layout.dim()];
    let mut saturations = 0;
    for (code, (amp, a)) in branches.iter().enumerate() {
        let payoff = (subsample_mean(params, a) - strike).max(0.0);
        let e = codec.encode(payoff);
        saturations += e.saturated as u64;
        let v = codec.decode(e.code);
        if v > gmax * (1.0 + GMAX_SLACK) {
            return Err(Error::BoundViolated { value: v, bound: gmax });
        }
        let r = (v / gmax).clamp(0.0, 1.0);
        let idx = layout.encode(&BasisFields {
            coeffs: split_code(code, layout.coeff_qubits, m),
            time: 0,
            value: e.code,
            ancillas: 0,
        });
        amplitudes[idx] = Complex64::new(amp * r.sqrt(), 0.0);
        amplitudes[idx | top] = Complex64::new(amp * (1.0 - r).sqrt(), 0.0);
    }
    Ok(StateVector::from_parts(amplitudes, *layout, *codec, saturations))
}

/// Classical `E_a[(Ḡ(a) − K)⁺]` over the increment grid, optionally
/// quantized through `codec`.
pub fn classical_subsample_payoff(
    params: &GbmParams,
    m: usize,
    n: usize,
    clip: f64,
    strike: f64,
    codec: Option<&FixedPointCodec>,
) -> Result<f64> {
    let branches = coefficient_branches(n, m, clip)?;
    Ok(branches
        .iter()
        .map(|(amp, a)| amp * amp * quantize(codec, (subsample_mean(params, a) - strike).max(0.0)))
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{exact_success_probability, AncillaPattern};

    #[test]
    fn gaussian_register_examples() {
        let a = prepare_gaussian_register(1, 3.0).unwrap();
        let p0 = (-9.0f64 / 2.0).exp();
        assert!((a[0].powi(2) - p0 / (1.0 + p0)).abs() < 1e-15);
        assert!((a[1].powi(2) - 1.0 / (1.0 + p0)).abs() < 1e-15);

        let a = prepare_gaussian_register(6, 8.0).unwrap();
        let var: f64 = a
            .iter()
            .enumerate()
            .map(|(c, x)| x * x * gaussian_grid_value(c, 6, 8.0).powi(2))
            .sum();
        assert!((var - 1.0).abs() < 0.02, "{var}");
        // Symmetric about x = 0 for every code with a mirror image.
        for c in 1..64 {
            assert!((a[c] - a[64 - c]).abs() < 1e-15);
        }
        assert!(prepare_gaussian_register(9, 4.0).is_err());
    }

    #[test]
    fn semidigital_single_time_and_flat_values() {
        let p = GbmParams::new(1.0, 0.1, 0.0).unwrap();
        let codec = FixedPointCodec::for_range(8, 2.0).unwrap();
        let layout = RegisterLayout::new(2, 1, 2, 8, 0).unwrap();
        let s = build_semidigital_state(&layout, &p, 0, 4, 4.0, &codec).unwrap();
        s.check_norm(1e-12).unwrap();
        for (i, a) in s.amplitudes().iter().enumerate() {
            if a.norm_sqr() > 0.0 {
                let f = layout.decode(i);
                let t = (f.time + 1) as f64 / 4.0;
                assert_eq!(f.value, codec.encode((0.1 * t).exp()).code);
            }
        }
        let one = RegisterLayout::new(2, 2, 0, 8, 0).unwrap();
        let s = build_semidigital_state(&one, &GbmParams::new(1.0, 0.0, 0.2).unwrap(), 1, 1, 4.0, &codec).unwrap();
        s.check_norm(1e-12).unwrap();
    }

    #[test]
    fn rotation_extremes() {
        let p = GbmParams::new(1.0, 0.0, 0.0).unwrap();
        let codec = FixedPointCodec::for_range(4, 1.0).unwrap();
        let layout = RegisterLayout::new(1, 1, 1, 4, 0).unwrap();
        let s = build_semidigital_state(&layout, &p, 0, 2, 4.0, &codec).unwrap();
        let full = attach_value_rotation(&s, 1.0).unwrap();
        full.check_norm(1e-12).unwrap();
        let ok = exact_success_probability(&full, AncillaPattern::single(0, false)).unwrap();
        assert!((ok - 1.0).abs() < 1e-12);
        assert!(matches!(attach_value_rotation(&s, 0.5), Err(Error::BoundViolated { .. })));

        let zero = build_quantized_subsample_state(
            &RegisterLayout::new(1, 2, 0, 4, 1).unwrap(),
            &p,
            2,
            10.0,
            1.0,
            4.0,
            &codec,
        )
        .unwrap();
        let ok = exact_success_probability(&zero, AncillaPattern::single(0, false)).unwrap();
        assert_eq!(ok, 0.0);
        let one = exact_success_probability(&zero, AncillaPattern::single(0, true)).unwrap();
        assert!((one - 1.0).abs() < 1e-12);
    }
}

//! Karhunen-Loève basis of standard Brownian motion on `[0, 1]` and the
//! Wiener sine series built on it.
//!
//! The Mercer kernel `min(s, t)` has eigenpairs
//! `λ_k = 1/((k − ½)²π²)`, `e_k(t) = √2 sin((k − ½)πt)` for `k ≥ 1`.
//! Path synthesis uses the equivalent Wiener series
//! `B(t) = a₀t + (√2/π) Σ_{k≥1} (a_k/k) sin(kπt)` with i.i.d. standard
//! normal `a_k`.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of terms summed by [`tail_variance_bound`] for its sharp value.
pub const TAIL_PARTIAL_TERMS: usize = 1_000_000;

/// `λ_k = 1/((k − ½)²π²)`.
pub fn kl_eigenvalue(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", 0.0, "eigen-indices start at 1"));
    }
    Ok(eigenvalue_unchecked(k))
}

#[inline]
fn eigenvalue_unchecked(k: usize) -> f64 {
    let h = (k as f64 - 0.5) * PI;
    1.0 / (h * h)
}

/// `e_k(t) = √2 sin((k − ½)πt)`.
pub fn kl_eigenfunction(k: usize, t: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", 0.0, "eigen-indices start at 1"));
    }
    check_time(t)?;
    Ok(SQRT_2 * ((k as f64 - 0.5) * PI * t).sin())
}

/// Lipschitz constant `G(k) = √2(k − ½)π` of `e_k` on `[0, 1]`.
pub fn eigenfunction_lipschitz(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k", 0.0, "eigen-indices start at 1"));
    }
    Ok(SQRT_2 * (k as f64 - 0.5) * PI)
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if (0.0..=1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::invalid("t", t, "time must lie in [0, 1]"))
    }
}

/// The first `max_index` eigenpairs of the Brownian-motion Mercer kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlBasis {
    pub max_index: usize,
    /// `λ_1, …, λ_L`.
    pub eigenvalues: Vec<f64>,
    /// `G(1), …, G(L)`.
    pub lipschitz_constants: Vec<f64>,
}

impl KlBasis {
    pub fn new(max_index: usize) -> Result<Self> {
        if max_index == 0 {
            return Err(Error::invalid("max_index", 0.0, "need at least one eigenpair"));
        }
        let eigenvalues = (1..=max_index).map(eigenvalue_unchecked).collect();
        let lipschitz_constants = (1..=max_index)
            .map(|k| SQRT_2 * (k as f64 - 0.5) * PI)
            .collect();
        Ok(Self {
            max_index,
            eigenvalues,
            lipschitz_constants,
        })
    }

    /// `sup_k λ_k G(k)²`; exactly 2 for this basis.
    pub fn mercer_constant(&self) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.lipschitz_constants)
            .map(|(l, g)| l * g * g)
            .fold(0.0, f64::max)
    }
}

/// Coefficients `(a₀, a₁, …, a_L)` of one truncated Wiener-series path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerCoefficients {
    a: Vec<f64>,
    clip_bound: f64,
}

impl WienerCoefficients {
    /// Requires a non-empty vector of finite entries with `|a_k| ≤ clip_bound`.
    pub fn new(a: Vec<f64>, clip_bound: f64) -> Result<Self> {
        if !(clip_bound > 0.0) {
            return Err(Error::invalid("clip_bound", clip_bound, "must be positive"));
        }
        if a.is_empty() {
            return Err(Error::LengthMismatch {
                what: "coefficients",
                expected: 1,
                actual: 0,
            });
        }
        if let Some(&bad) = a.iter().find(|x| !x.is_finite() || x.abs() > clip_bound) {
            return Err(Error::invalid("a_k", bad, format!("must be finite with |a_k| <= {clip_bound}")));
        }
        Ok(Self { a, clip_bound })
    }

    pub(crate) fn from_clamped(a: Vec<f64>, clip_bound: f64) -> Self {
        debug_assert!(a.iter().all(|x| x.abs() <= clip_bound));
        Self { a, clip_bound }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn clip_bound(&self) -> f64 {
        self.clip_bound
    }

    /// Truncation level `L` (number of oscillatory terms).
    pub fn truncation(&self) -> usize {
        self.a.len() - 1
    }
}

/// Truncated Wiener series by direct sine summation.
///
/// This is the reference form; use [`wiener_eval_horner`] in hot loops.
pub fn wiener_eval(coeffs: &WienerCoefficients, t: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&t));
    let a = coeffs.as_slice();
    let osc: f64 = a[1..]
        .iter()
        .enumerate()
        .map(|(i, ak)| {
            let k = (i + 1) as f64;
            ak / k * sin_pi(k * t)
        })
        .sum();
    a[0] * t + SQRT_2 / PI * osc
}

/// Truncated Wiener series as a polynomial in `cos(πt)`.
///
/// Uses `sin(kπt) = sin(πt) U_{k−1}(cos πt)` and evaluates
/// `Σ_{k=1}^{L} (a_k/k) U_{k−1}(x)` with the Clenshaw recurrence, i.e. `L`
/// multiply-adds after two trigonometric calls.
pub fn wiener_eval_horner(coeffs: &WienerCoefficients, t: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&t));
    let (s, x) = pi_sin_cos(t);
    wiener_eval_trig(coeffs.as_slice(), t, s, x)
}

/// `sin(πx)` with exact zeros at integers.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    let (r, sign) = if r >= 1.0 { (r - 1.0, -1.0) } else { (r, 1.0) };
    sign * (PI * r.min(1.0 - r)).sin()
}

/// `(sin πt, cos πt)` for `t ∈ [0, 1]`, reflected about `½` so that
/// `t = 1` gives exactly `(0, −1)`.
pub(crate) fn pi_sin_cos(t: f64) -> (f64, f64) {
    if t > 0.5 {
        let (s, c) = (PI * (1.0 - t)).sin_cos();
        (s, -c)
    } else {
        (PI * t).sin_cos()
    }
}

/// Clenshaw evaluation given precomputed `sin(πt)` and `cos(πt)`.
#[inline]
pub(crate) fn wiener_eval_trig(a: &[f64], t: f64, sin_pt: f64, cos_pt: f64) -> f64 {
    let two_x = 2.0 * cos_pt;
    let (mut b1, mut b2) = (0.0f64, 0.0f64);
    for k in (1..a.len()).rev() {
        let b0 = a[k] / k as f64 + two_x * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    a[0] * t + SQRT_2 / PI * sin_pt * b1
}

/// Analytic bounds on the truncated-tail variance `Σ_{k>L} 2λ_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    /// `2/(π²L)`, an upper bound on the full tail.
    pub closed: f64,
    /// `Σ_{k=L+1}^{L+10⁶} 2/((k − ½)²π²)`.
    pub partial: f64,
}

pub fn tail_variance_bound(l: usize) -> Result<TailBound> {
    if l == 0 {
        return Err(Error::invalid("L", 0.0, "truncation level must be >= 1"));
    }
    let closed = 2.0 / (PI * PI * l as f64);
    // Smallest terms first to limit rounding.
    let partial = (l + 1..=l + TAIL_PARTIAL_TERMS)
        .rev()
        .map(|k| 2.0 * eigenvalue_unchecked(k))
        .sum();
    Ok(TailBound { closed, partial })
}

/// Exact `Σ_{k>L} 2λ_k` using `Σ_{k≥1} 2λ_k = 1`.
pub fn kl_tail_variance(l: usize) -> f64 {
    let head: f64 = (1..=l).rev().map(|k| 2.0 * eigenvalue_unchecked(k)).sum();
    (1.0 - head).max(0.0)
}

/// Smallest `L ≥ 1` whose tail variance `Σ_{k>L} 2λ_k` is at most `ε²`.
///
/// The closed bound `2/(π²L)` gives a starting point `⌈2/(π²ε²)⌉` that is
/// always admissible; the exact tail then walks it down.
pub fn truncation_index_bm(epsilon: f64) -> Result<usize> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid("epsilon", epsilon, "must lie in (0, 1]"));
    }
    let target = epsilon * epsilon;
    let upper = (2.0 / (PI * PI * target)).ceil().max(1.0) as usize;
    let mut tail = kl_tail_variance(upper);
    let mut l = upper;
    while l > 1 {
        let prev = tail + 2.0 * eigenvalue_unchecked(l);
        if prev > target {
            break;
        }
        tail = prev;
        l -= 1;
    }
    Ok(l)
}

/// Variance of the truncated Wiener series at `t`:
/// `t² + (2/π²) Σ_{k≤L} sin²(kπt)/k²`.
pub fn truncated_variance(l: usize, t: f64) -> f64 {
    let s: f64 = (1..=l)
        .map(|k| {
            let kf = k as f64;
            ((kf * PI * t).sin() / kf).powi(2)
        })
        .sum();
    t * t + 2.0 / (PI * PI) * s
}

/// `H_L = Σ_{k≤L} 1/k`.
pub fn harmonic(l: usize) -> f64 {
    (1..=l).rev().map(|k| 1.0 / k as f64).sum()
}

/// Analytic versus measured truncation error at one level `L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub l: usize,
    pub analytic_tail_bound: f64,
    pub empirical_tail_mse: f64,
    pub epsilon_target: f64,
}

impl TruncationReport {
    pub fn within_bound(&self, stat_tolerance: f64) -> bool {
        self.empirical_tail_mse <= self.analytic_tail_bound * (1.0 + stat_tolerance)
    }
}

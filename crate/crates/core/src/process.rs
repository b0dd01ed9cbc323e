//! GBM sampling: coefficient draws, exponentiated KL paths, exact sequential
//! paths on a grid and the time-domain rejection sampler.

use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::klcore::{harmonic, wiener_eval_horner, WienerCoefficients};

/// Default coefficient clip `A`; a standard normal exceeds it with
/// probability `2Φ(−8) ≈ 1.2e−15`.
pub const DEFAULT_CLIP: f64 = 8.0;

/// Proposals allowed per requested acceptance before the sampler gives up.
pub const STARVATION_FACTOR: u64 = 1_000_000;

/// `dS = μS dt + σS dB`, `S(0) = s0`, on `t ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub s0: f64,
    pub mu: f64,
    pub sigma: f64,
}

impl GbmParams {
    /// `sigma = 0` is accepted here for degenerate checks; front ends
    /// demand `sigma > 0`.
    pub fn new(s0: f64, mu: f64, sigma: f64) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::invalid("s0", s0, "must be positive and finite"));
        }
        if !mu.is_finite() {
            return Err(Error::invalid("mu", mu, "must be finite"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid("sigma", sigma, "must be non-negative and finite"));
        }
        Ok(Self { s0, mu, sigma })
    }

    /// `μ − σ²/2`.
    pub fn effective_drift(&self) -> f64 {
        self.mu - 0.5 * self.sigma * self.sigma
    }

    /// `E[S(s) S(t)] = s0² exp(μ(s+t) + σ² min(s,t))`.
    pub fn cross_moment(&self, s: f64, t: f64) -> f64 {
        self.s0 * self.s0 * (self.mu * (s + t) + self.sigma * self.sigma * s.min(t)).exp()
    }

    /// `E[(S(t) − S(s))²]` under the exact law.
    pub fn increment_second_moment(&self, s: f64, t: f64) -> f64 {
        (self.cross_moment(s, s) + self.cross_moment(t, t) - 2.0 * self.cross_moment(s, t)).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// `t_i = i/T`, `i = 1..T`.
    Monitoring,
    /// `t_k = k/M`, `k = 0..M`.
    Subsample,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
    kind: GridKind,
}

impl TimeGrid {
    pub fn uniform_monitoring(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::invalid("T", 0.0, "need at least one monitoring date"));
        }
        let points = (1..=count).map(|i| i as f64 / count as f64).collect();
        Ok(Self {
            points,
            kind: GridKind::Monitoring,
        })
    }

    pub fn subsample(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("M", 0.0, "need at least one sub-interval"));
        }
        let points = (0..=m).map(|k| k as f64 / m as f64).collect();
        Ok(Self {
            points,
            kind: GridKind::Subsample,
        })
    }

    pub fn from_points(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("grid", 0.0, "grid must be non-empty"));
        }
        if points[0] < 0.0 || points[points.len() - 1] > 1.0 {
            return Err(Error::invalid("grid", points[0], "points must lie in [0, 1]"));
        }
        if let Some(w) = points.windows(2).find(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("grid", w[1], "points must be strictly increasing"));
        }
        Ok(Self {
            points,
            kind: GridKind::Custom,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Normalization constant `G_max` for values of `G_L(a, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmaxBound {
    pub value: f64,
    pub clip_bound: f64,
    /// Number of evaluations that were clamped to `value`.
    pub exceed_count: u64,
}

impl GmaxBound {
    pub fn new(value: f64, clip_bound: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::invalid("gmax", value, "must be positive and finite"));
        }
        Ok(Self {
            value,
            clip_bound,
            exceed_count: 0,
        })
    }

    /// Clamps `v` to the bound, counting the event.
    pub fn clamp(&mut self, v: f64) -> f64 {
        if v > self.value || v.is_nan() {
            self.exceed_count += 1;
            self.value
        } else {
            v
        }
    }
}

/// `s0 · exp(σ A (1 + (√2/π) H_L) + max(μ − σ²/2, 0))`.
///
/// Under clipping `|a_k| ≤ A` the truncated series obeys
/// `|B_L(t)| ≤ A(1 + (√2/π) H_L)`, so this dominates every `G_L(a, t)`.
pub fn g_max_bound(params: &GbmParams, l: usize, clip: f64) -> Result<GmaxBound> {
    if !(clip >= 4.0) {
        return Err(Error::invalid("A", clip, "clip bound must be >= 4"));
    }
    Ok(GmaxBound {
        value: clipped_series_bound(params, l, clip),
        clip_bound: clip,
        exceed_count: 0,
    })
}

pub(crate) fn clipped_series_bound(params: &GbmParams, l: usize, clip: f64) -> f64 {
    let b_max = clip * (1.0 + SQRT_2 / PI * harmonic(l));
    params.s0 * (params.sigma * b_max + params.effective_drift().max(0.0)).exp()
}

/// Per-path envelope `s0 · exp(σ(|a₀| + (√2/π) Σ|a_k|/k) + max(μ − σ²/2, 0))`.
///
/// Dominates `G_L(a, t)` for this coefficient vector on all of `[0, 1]`
/// and is usually far tighter than [`g_max_bound`].
pub fn path_envelope(params: &GbmParams, coeffs: &WienerCoefficients) -> f64 {
    let a = coeffs.as_slice();
    let osc: f64 = a[1..]
        .iter()
        .enumerate()
        .map(|(i, ak)| ak.abs() / (i + 1) as f64)
        .sum();
    let b_max = a[0].abs() + SQRT_2 / PI * osc;
    params.s0 * (params.sigma * b_max + params.effective_drift().max(0.0)).exp()
}

/// Draws `L + 1` standard normals clamped to `[−A, A]`. Returns the vector
/// and the number of clamped draws.
pub fn sample_coefficients<R: Rng + ?Sized>(
    rng: &mut R,
    l: usize,
    clip: f64,
) -> Result<(WienerCoefficients, u64)> {
    if !(clip >= 4.0) {
        return Err(Error::invalid("A", clip, "clip bound must be >= 4"));
    }
    let mut clamped = 0u64;
    let a = (0..=l)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() > clip {
                clamped += 1;
                z.clamp(-clip, clip)
            } else {
                z
            }
        })
        .collect();
    Ok((WienerCoefficients::from_clamped(a, clip), clamped))
}

/// `s0 · exp(σb + (μ − σ²/2)t)`.
#[inline]
pub fn gbm_from_bm(b: f64, t: f64, params: &GbmParams) -> f64 {
    params.s0 * (params.sigma * b + params.effective_drift() * t).exp()
}

/// [`gbm_from_bm`] clamped to a normalization bound.
pub fn gbm_from_bm_clamped(b: f64, t: f64, params: &GbmParams, bound: &mut GmaxBound) -> f64 {
    bound.clamp(gbm_from_bm(b, t, params))
}

/// `G_L(a, t)`, the exponentiated truncated Wiener series.
#[inline]
pub fn path_value(coeffs: &WienerCoefficients, t: f64, params: &GbmParams) -> f64 {
    gbm_from_bm(wiener_eval_horner(coeffs, t), t, params)
}

/// Visits `S(t_k)` along the grid using exact lognormal increments
/// `S(t_{k+1}) = S(t_k) exp((μ − σ²/2)Δt + σ√Δt z_k)`. Points at `t = 0`
/// consume no randomness.
#[inline]
pub(crate) fn walk_gbm<R: Rng + ?Sized>(
    rng: &mut R,
    points: &[f64],
    params: &GbmParams,
    mut visit: impl FnMut(usize, f64),
) {
    let drift = params.effective_drift();
    let mut log_s = params.s0.ln();
    let mut prev = 0.0;
    for (k, &t) in points.iter().enumerate() {
        let dt = t - prev;
        if dt > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            log_s += drift * dt + params.sigma * dt.sqrt() * z;
        }
        prev = t;
        visit(k, log_s.exp());
    }
}

/// One GBM path on `grid` with the exact joint law.
pub fn gbm_path_sequential<R: Rng + ?Sized>(
    rng: &mut R,
    grid: &TimeGrid,
    params: &GbmParams,
) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", 0.0, "grid must be non-empty"));
    }
    let mut out = vec![0.0; grid.len()];
    walk_gbm(rng, grid.points(), params, |k, s| out[k] = s);
    Ok(out)
}

/// How the rejection sampler proposes times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProposalMode {
    /// `t ~ U[0, 1]`.
    #[default]
    Continuous,
    /// `t` uniform on the monitoring dates `{1/T, …, 1}`.
    Snapped { monitoring: usize },
}

impl ProposalMode {
    #[inline]
    pub(crate) fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match *self {
            ProposalMode::Continuous => u,
            ProposalMode::Snapped { monitoring } => {
                let idx = ((u * monitoring as f64) as usize).min(monitoring - 1);
                (idx + 1) as f64 / monitoring as f64
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ProposalMode::Snapped { monitoring: 0 } => {
                Err(Error::invalid("T", 0.0, "snapped proposals need T >= 1"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionOutcome {
    /// Accepted times, in acceptance order.
    pub times: Vec<f64>,
    /// Total proposals, accepted or not.
    pub proposals: u64,
}

/// Draws `count` times with density proportional to `G_L(a, t)`.
///
/// Each proposal `t` is accepted iff `z ≤ G_L(a, t)/G_max` for `z ~ U[0, 1]`.
/// Values above the bound are clamped and counted in `gmax.exceed_count`.
pub fn rejection_sample_times<R: Rng + ?Sized>(
    rng: &mut R,
    coeffs: &WienerCoefficients,
    count: usize,
    gmax: &mut GmaxBound,
    params: &GbmParams,
    mode: ProposalMode,
) -> Result<RejectionOutcome> {
    let mut times = Vec::with_capacity(count);
    let proposals = rejection_core(rng, coeffs, count, gmax, params, mode, |t| times.push(t))?;
    Ok(RejectionOutcome { times, proposals })
}

/// Shared rejection loop; returns the number of proposals.
pub(crate) fn rejection_core<R: Rng + ?Sized>(
    rng: &mut R,
    coeffs: &WienerCoefficients,
    count: usize,
    gmax: &mut GmaxBound,
    params: &GbmParams,
    mode: ProposalMode,
    mut on_accept: impl FnMut(f64),
) -> Result<u64> {
    if count == 0 {
        return Err(Error::invalid("M1", 0.0, "need at least one accepted sample"));
    }
    mode.validate()?;
    let limit = STARVATION_FACTOR.saturating_mul(count as u64);
    let mut accepted = 0usize;
    let mut proposals = 0u64;
    while accepted < count {
        if proposals >= limit {
            return Err(Error::RejectionStarved {
                requested: count,
                accepted,
                proposals,
                envelope: gmax.value,
            });
        }
        proposals += 1;
        let t = mode.propose(rng);
        let z: f64 = rng.random();
        let g = gmax.clamp(path_value(coeffs, t, params));
        if z * gmax.value <= g {
            accepted += 1;
            on_accept(t);
        }
    }
    Ok(proposals)
}

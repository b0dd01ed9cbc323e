//! Asian payoffs and the price estimators.
//!
//! Every estimator is a pure function of its inputs and seed. Outer paths
//! draw from their own counter-based stream, so results do not depend on the
//! size of the rayon pool.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::klcore::{truncated_variance, truncation_index_bm};
use crate::process::{
    clipped_series_bound, path_envelope, path_value, rejection_core, sample_coefficients,
    walk_gbm, GbmParams, GmaxBound, ProposalMode, TimeGrid, DEFAULT_CLIP,
};
use crate::rng::StreamFamily;
use crate::stats::{normal_cdf, simpson, try_par_fold, Accumulator};

/// Largest sub-sampling grid accepted.
pub const MAX_SUBSAMPLE_GRID: usize = 100_000_000;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// `(Σ wᵢ Sᵢ − K)⁺` on `T` monitoring dates `i/T`, times a discount factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsianPayoffSpec {
    strike: f64,
    weights: Vec<f64>,
    discount: f64,
}

impl AsianPayoffSpec {
    /// Uniform weights `1/T`.
    pub fn uniform(strike: f64, monitoring_count: usize) -> Result<Self> {
        if monitoring_count == 0 {
            return Err(Error::invalid("T", 0.0, "need at least one monitoring date"));
        }
        let w = 1.0 / monitoring_count as f64;
        Self::with_weights(strike, vec![w; monitoring_count])
    }

    pub fn with_weights(strike: f64, weights: Vec<f64>) -> Result<Self> {
        if !strike.is_finite() {
            return Err(Error::invalid("strike", strike, "must be finite"));
        }
        if weights.is_empty() {
            return Err(Error::invalid("T", 0.0, "need at least one monitoring date"));
        }
        if let Some(&w) = weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("weights", w, "weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL * weights.len() as f64 {
            return Err(Error::invalid("weights", total, "weights must sum to 1"));
        }
        Ok(Self {
            strike,
            weights,
            discount: 1.0,
        })
    }

    /// Multiplies final values (never per-path payoffs) by `factor`.
    pub fn with_discount(mut self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid("discount", factor, "must be positive and finite"));
        }
        self.discount = factor;
        Ok(self)
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn monitoring_count(&self) -> usize {
        self.weights.len()
    }

    pub fn is_uniform(&self) -> bool {
        let w = 1.0 / self.weights.len() as f64;
        self.weights.iter().all(|x| (x - w).abs() <= 1e-15)
    }

    pub fn monitoring_grid(&self) -> TimeGrid {
        TimeGrid::uniform_monitoring(self.weights.len()).expect("non-empty by construction")
    }

    /// The averaging rule this payoff applies to a path.
    pub fn averaging_rule(&self) -> AveragingRule {
        AveragingRule::Discrete {
            times: self.monitoring_grid().points().to_vec(),
            weights: self.weights.clone(),
        }
    }
}

#[inline]
fn call(average: f64, strike: f64) -> f64 {
    (average - strike).max(0.0)
}

/// `(Σ wᵢ Sᵢ − K)⁺`.
pub fn asian_payoff(path_values: &[f64], spec: &AsianPayoffSpec) -> Result<f64> {
    if path_values.len() != spec.weights.len() {
        return Err(Error::LengthMismatch {
            what: "path",
            expected: spec.weights.len(),
            actual: path_values.len(),
        });
    }
    let avg: f64 = path_values.iter().zip(&spec.weights).map(|(s, w)| s * w).sum();
    Ok(call(avg, spec.strike))
}

/// Estimator that produced an [`Estimate`]. Serialized names match the CLI
/// `--method` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Baseline,
    KlNested,
    Subsample,
    #[serde(rename = "geometric-cf")]
    GeometricClosedForm,
    #[serde(rename = "geometric-mc")]
    GeometricMonteCarlo,
    QsimCheck,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::KlNested => "kl-nested",
            Method::Subsample => "subsample",
            Method::GeometricClosedForm => "geometric-cf",
            Method::GeometricMonteCarlo => "geometric-mc",
            Method::QsimCheck => "qsim-check",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A Monte Carlo (or closed-form) price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Sample standard deviation of outer payoffs over `√n_outer`.
    pub std_error: f64,
    pub n_outer: u64,
    /// Inner samples per outer path; 1 when not nested.
    pub n_inner: u64,
    pub seed: u64,
    pub method: Method,
    /// Clamped coefficient draws plus clamped path values.
    pub clip_events: u64,
}

impl Estimate {
    fn from_accumulator(acc: &Accumulator, spec: &AsianPayoffSpec, method: Method, seed: u64) -> Self {
        Self {
            value: acc.mean * spec.discount,
            std_error: acc.std_error() * spec.discount,
            n_outer: acc.count,
            n_inner: 1,
            seed,
            method,
            clip_events: 0,
        }
    }
}

fn check_paths(n_paths: u64) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", n_paths as f64, "need at least two paths"));
    }
    Ok(())
}

#[derive(Default)]
struct Tally {
    acc: Accumulator,
    clips: u64,
}

impl Tally {
    fn merge(&mut self, other: Tally) {
        self.acc.merge(&other.acc);
        self.clips += other.clips;
    }
}

/// Plain Monte Carlo over exact sequential GBM paths on the monitoring grid.
/// Unbiased for the discretely monitored price.
pub fn price_baseline(params: &GbmParams, spec: &AsianPayoffSpec, n_paths: u64, seed: u64) -> Result<Estimate> {
    check_paths(n_paths)?;
    let grid = spec.monitoring_grid();
    let family = StreamFamily::new(seed, "baseline");
    let acc = crate::stats::par_accumulate(n_paths, |i| {
        let mut avg = 0.0;
        walk_gbm(&mut family.stream(i), grid.points(), params, |k, s| avg += spec.weights[k] * s);
        call(avg, spec.strike)
    });
    Ok(Estimate::from_accumulator(&acc, spec, Method::Baseline, seed))
}

/// How the nested estimator recovers the time average `∫G_L(a, t) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InnerMode {
    /// Run the rejection sampler to `M1` acceptances after `N` proposals and
    /// use `envelope · (M1 − 1)/(N − 1)`, unbiased under inverse-binomial
    /// sampling.
    #[default]
    AcceptanceRate,
    /// `(1/M1) Σ G_L(a, t_j)` over `M1` uniform proposals.
    UniformAverage,
}

/// Normalization used by the rejection sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeMode {
    /// [`path_envelope`] of each coefficient vector.
    #[default]
    PerPath,
    /// The global clipped bound of [`crate::process::g_max_bound`].
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlNestedConfig {
    pub epsilon: f64,
    pub m0: u64,
    pub m1: u64,
    /// Explicit truncation; `None` means `L_X(ε)`.
    pub truncation: Option<usize>,
    pub clip: f64,
    pub inner: InnerMode,
    pub envelope: EnvelopeMode,
    pub proposals: ProposalMode,
}

impl KlNestedConfig {
    pub fn new(epsilon: f64, m0: u64, m1: u64) -> Self {
        Self {
            epsilon,
            m0,
            m1,
            truncation: None,
            clip: DEFAULT_CLIP,
            inner: InnerMode::default(),
            envelope: EnvelopeMode::default(),
            proposals: ProposalMode::default(),
        }
    }

    /// `M0 = M1 = ⌈c/ε²⌉`.
    pub fn default_sizing(epsilon: f64, c: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("c", c, "sizing constant must be positive"));
        }
        let m = (c / (epsilon * epsilon) - 1e-9).ceil().max(2.0) as u64;
        Ok(Self::new(epsilon, m, m))
    }

    pub fn resolved_truncation(&self) -> Result<usize> {
        match self.truncation {
            Some(l) => Ok(l),
            None => truncation_index_bm(self.epsilon),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid("epsilon", epsilon, "must lie in (0, 1]"));
    }
    Ok(())
}

/// Nested KL estimator `(1/M0) Σ_a (Ḡ_L(a) − K)⁺` with `Ḡ_L(a)` recovered
/// per [`InnerMode`]. The time average is uniform, so the payoff must carry
/// uniform weights.
pub fn price_kl_nested(
    params: &GbmParams,
    spec: &AsianPayoffSpec,
    config: &KlNestedConfig,
    seed: u64,
) -> Result<Estimate> {
    check_epsilon(config.epsilon)?;
    check_paths(config.m0)?;
    if config.m1 < 2 {
        return Err(Error::invalid("M1", config.m1 as f64, "need at least two inner samples"));
    }
    if !spec.is_uniform() {
        return Err(Error::invalid("weights", 0.0, "nested estimator needs uniform weights"));
    }
    let l = config.resolved_truncation()?;
    let global = clipped_series_bound(params, l, config.clip);
    let family = StreamFamily::new(seed, "kl-nested");
    let m1 = config.m1;

    let tally = try_par_fold(
        config.m0,
        Tally::default,
        |tally: &mut Tally, i| -> Result<()> {
            let mut rng = family.stream(i);
            let (coeffs, clamped) = sample_coefficients(&mut rng, l, config.clip)?;
            let envelope = match config.envelope {
                EnvelopeMode::PerPath => path_envelope(params, &coeffs),
                EnvelopeMode::Global => global,
            };
            let mut bound = GmaxBound::new(envelope, config.clip)?;
            let mean = match config.inner {
                InnerMode::AcceptanceRate => {
                    let n = rejection_core(
                        &mut rng,
                        &coeffs,
                        m1 as usize,
                        &mut bound,
                        params,
                        config.proposals,
                        |_| {},
                    )?;
                    envelope * (m1 - 1) as f64 / (n - 1) as f64
                }
                InnerMode::UniformAverage => {
                    let mut sum = 0.0;
                    for _ in 0..m1 {
                        let t = config.proposals.propose(&mut rng);
                        sum += bound.clamp(path_value(&coeffs, t, params));
                    }
                    sum / m1 as f64
                }
            };
            tally.acc.push(call(mean, spec.strike));
            tally.clips += clamped + bound.exceed_count;
            Ok(())
        },
        Tally::merge,
    )?;

    let mut est = Estimate::from_accumulator(&tally.acc, spec, Method::KlNested, seed);
    est.n_inner = m1;
    est.clip_events = tally.clips;
    Ok(est)
}

/// How a sub-sampled path is turned into a payoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SubsampleRule {
    /// Uniform mean of `S(k/M)`, `k = 1..M`.
    #[default]
    GridMean,
    /// Monitoring weights applied to `S(c(tᵢ))` with `c(t) = ⌊tM⌋/M`.
    RoundDown,
}

/// `M = ⌈1/ε²⌉`, guarded against absurd grids.
pub fn subsample_grid_size(epsilon: f64) -> Result<usize> {
    check_epsilon(epsilon)?;
    // The offset keeps exact reciprocals such as ε = 0.05 at M = 400.
    let m = (1.0 / (epsilon * epsilon) - 1e-9).ceil();
    if m > MAX_SUBSAMPLE_GRID as f64 {
        return Err(Error::ResourceGuard(format!(
            "sub-sampling grid of {m} points exceeds {MAX_SUBSAMPLE_GRID}"
        )));
    }
    Ok(m.max(1.0) as usize)
}

/// Index `k` with `c(t) = k/M`.
#[inline]
pub(crate) fn round_down_index(t: f64, m: usize) -> usize {
    ((t * m as f64 + 1e-9).floor() as usize).min(m)
}

/// Sub-sampling estimator with the default [`SubsampleRule::GridMean`].
pub fn price_subsample(
    params: &GbmParams,
    spec: &AsianPayoffSpec,
    epsilon: f64,
    n_paths: u64,
    seed: u64,
) -> Result<Estimate> {
    price_subsample_with_rule(params, spec, epsilon, SubsampleRule::GridMean, n_paths, seed)
}

pub fn price_subsample_with_rule(
    params: &GbmParams,
    spec: &AsianPayoffSpec,
    epsilon: f64,
    rule: SubsampleRule,
    n_paths: u64,
    seed: u64,
) -> Result<Estimate> {
    check_paths(n_paths)?;
    let m = subsample_grid_size(epsilon)?;
    let grid = TimeGrid::subsample(m)?;
    let family = StreamFamily::new(seed, "subsample");
    let acc = match rule {
        SubsampleRule::GridMean => {
            let w = 1.0 / m as f64;
            crate::stats::par_accumulate(n_paths, |i| {
                let mut sum = 0.0;
                walk_gbm(&mut family.stream(i), grid.points(), params, |k, s| {
                    if k > 0 {
                        sum += s;
                    }
                });
                call(sum * w, spec.strike)
            })
        }
        SubsampleRule::RoundDown => {
            let monitoring = spec.monitoring_grid();
            let index: Vec<usize> = monitoring.points().iter().map(|&t| round_down_index(t, m)).collect();
            crate::stats::par_accumulate(n_paths, |i| {
                let mut path = vec![0.0; m + 1];
                walk_gbm(&mut family.stream(i), grid.points(), params, |k, s| path[k] = s);
                let avg: f64 = index.iter().zip(&spec.weights).map(|(&k, w)| w * path[k]).sum();
                call(avg, spec.strike)
            })
        }
    };
    Ok(Estimate::from_accumulator(&acc, spec, Method::Subsample, seed))
}

/// Mean `m` and variance `v` of `ln A_G` for the discrete geometric average.
pub fn geometric_log_moments(params: &GbmParams, grid: &TimeGrid) -> (f64, f64) {
    let t = grid.points();
    let n = t.len() as f64;
    let mean_t = t.iter().sum::<f64>() / n;
    // Σ_{i,j} min(tᵢ, tⱼ) for increasing t: tᵢ is the minimum of 2(n−i)−1 pairs.
    let len = t.len();
    let min_sum: f64 = t
        .iter()
        .enumerate()
        .map(|(i, ti)| ti * (2 * (len - i) - 1) as f64)
        .sum();
    let m = params.s0.ln() + params.effective_drift() * mean_t;
    let v = params.sigma * params.sigma * min_sum / (n * n);
    (m, v)
}

/// `E[(A_G − K)⁺]` for the discrete geometric average on `grid`.
pub fn geometric_asian_closed_form(params: &GbmParams, grid: &TimeGrid, strike: f64) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", 0.0, "grid must be non-empty"));
    }
    if !strike.is_finite() {
        return Err(Error::invalid("strike", strike, "must be finite"));
    }
    let (m, v) = geometric_log_moments(params, grid);
    if v <= 0.0 {
        return Ok(call(m.exp(), strike));
    }
    let forward = (m + 0.5 * v).exp();
    if strike <= 0.0 {
        return Ok(forward - strike);
    }
    let sd = v.sqrt();
    let d = (m - strike.ln()) / sd;
    Ok(forward * normal_cdf(d + sd) - strike * normal_cdf(d))
}

/// Brute-force Monte Carlo of the discrete geometric-average call.
pub fn price_geometric_mc(
    params: &GbmParams,
    grid: &TimeGrid,
    strike: f64,
    n_paths: u64,
    seed: u64,
) -> Result<Estimate> {
    check_paths(n_paths)?;
    if grid.is_empty() {
        return Err(Error::invalid("grid", 0.0, "grid must be non-empty"));
    }
    let family = StreamFamily::new(seed, "geometric-mc");
    let inv = 1.0 / grid.len() as f64;
    let acc = crate::stats::par_accumulate(n_paths, |i| {
        let mut log_sum = 0.0;
        walk_gbm(&mut family.stream(i), grid.points(), params, |_, s| log_sum += s.ln());
        call((log_sum * inv).exp(), strike)
    });
    Ok(Estimate {
        value: acc.mean,
        std_error: acc.std_error(),
        n_outer: acc.count,
        n_inner: 1,
        seed,
        method: Method::GeometricMonteCarlo,
        clip_events: 0,
    })
}

/// A linear functional `∫ S dν` of the GBM path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AveragingRule {
    /// `Σ wᵢ S(tᵢ)`.
    Discrete { times: Vec<f64>, weights: Vec<f64> },
    /// `∫₀¹ S(t) dt`.
    Continuous,
}

impl AveragingRule {
    pub fn uniform_grid(points: usize) -> Self {
        let w = 1.0 / points as f64;
        AveragingRule::Discrete {
            times: (1..=points).map(|i| i as f64 / points as f64).collect(),
            weights: vec![w; points],
        }
    }
}

/// `∫_a^b e^{cs} ds`.
fn int_exp(c: f64, a: f64, b: f64) -> f64 {
    if c == 0.0 {
        b - a
    } else {
        (c * a).exp() * (c * (b - a)).exp_m1() / c
    }
}

const CONTINUOUS_INTERVALS: usize = 4096;

/// `∫₀¹ E[S(t) S(s)] ds`.
fn moment_point_continuous(p: &GbmParams, t: f64) -> f64 {
    let s2 = p.sigma * p.sigma;
    p.s0 * p.s0
        * (p.mu * t).exp()
        * (int_exp(p.mu + s2, 0.0, t) + (s2 * t).exp() * int_exp(p.mu, t, 1.0))
}

/// `E[(∫S dν_a)(∫S dν_b)]`.
fn rule_cross_moment(p: &GbmParams, a: &AveragingRule, b: &AveragingRule) -> f64 {
    use AveragingRule::*;
    match (a, b) {
        (Discrete { times: ta, weights: wa }, Discrete { times: tb, weights: wb }) => ta
            .iter()
            .zip(wa)
            .map(|(&t, &w)| w * tb.iter().zip(wb).map(|(&s, &v)| v * p.cross_moment(t, s)).sum::<f64>())
            .sum(),
        (Discrete { times, weights }, Continuous) | (Continuous, Discrete { times, weights }) => times
            .iter()
            .zip(weights)
            .map(|(&t, &w)| w * moment_point_continuous(p, t))
            .sum(),
        (Continuous, Continuous) => {
            let s2 = p.sigma * p.sigma;
            let inner = |t: f64| 2.0 * p.s0 * p.s0 * (p.mu * t).exp() * int_exp(p.mu + s2, 0.0, t);
            simpson(inner, 0.0, 1.0, CONTINUOUS_INTERVALS)
        }
    }
}

/// `√E[(∫S dν_a − ∫S dν_b)²]` under the exact GBM law.
///
/// The payoff is 1-Lipschitz in the average, so this bounds the price gap
/// between two averaging rules.
pub fn averaging_rule_rms_gap(params: &GbmParams, a: &AveragingRule, b: &AveragingRule) -> f64 {
    let aa = rule_cross_moment(params, a, a);
    let bb = rule_cross_moment(params, b, b);
    let ab = rule_cross_moment(params, a, b);
    (aa + bb - 2.0 * ab).max(0.0).sqrt()
}

/// `E[(S(t) − S_L(t))²]` where `S_L` uses the `L`-term series coupled to the
/// same Brownian path.
pub fn truncation_mse_at(params: &GbmParams, l: usize, t: f64) -> f64 {
    let s2 = params.sigma * params.sigma;
    let v = truncated_variance(l, t);
    let r = (t - v).max(0.0);
    params.s0 * params.s0
        * (2.0 * params.effective_drift() * t + 2.0 * s2 * v).exp()
        * ((2.0 * s2 * r).exp_m1() - 2.0 * (0.5 * s2 * r).exp_m1())
}

/// `√∫ E[(S(t) − S_L(t))²] dν(t)`, which bounds the RMS payoff error from
/// truncating at `L` under averaging rule `ν`.
pub fn truncation_rms(params: &GbmParams, l: usize, rule: &AveragingRule) -> f64 {
    let mse = match rule {
        AveragingRule::Discrete { times, weights } => times
            .iter()
            .zip(weights)
            .map(|(&t, &w)| w * truncation_mse_at(params, l, t))
            .sum(),
        AveragingRule::Continuous => {
            simpson(|t| truncation_mse_at(params, l, t), 0.0, 1.0, CONTINUOUS_INTERVALS)
        }
    };
    mse.max(0.0).sqrt()
}

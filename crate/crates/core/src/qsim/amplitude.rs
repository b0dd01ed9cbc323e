use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

const THETA_GRID: usize = 20_000;
const REFINE_STEPS: usize = 60;

/// Oracle calls of a schedule: each shot at depth `m` costs `2m + 1`.
pub fn oracle_calls(shots_per_depth: u64, grover_depths: &[u64]) -> u64 {
    grover_depths.iter().map(|m| shots_per_depth * (2 * m + 1)).sum()
}

/// Classical proportion estimator from `shots` Bernoulli(`p_true`) draws.
pub fn proportion_estimate<R: Rng + ?Sized>(p_true: f64, shots: u64, rng: &mut R) -> Result<f64> {
    check_probability(p_true)?;
    if shots == 0 {
        return Err(Error::invalid("shots", 0.0, "need at least one shot"));
    }
    let hits = Binomial::new(shots, p_true).expect("validated probability").sample(rng);
    Ok(hits as f64 / shots as f64)
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p_true", p, "must lie in [0, 1]"));
    }
    Ok(())
}

/// Maximum-likelihood amplitude estimation without phase estimation.
///
/// At depth `m` each shot succeeds with probability `sin²((2m+1)θ)`,
/// `θ = asin √p`. Hit counts are drawn binomially and `θ` is found by grid
/// search over `[0, π/2]` followed by golden-section refinement. With only
/// depth 0 this is the proportion `hits/shots`.
pub fn mle_amplitude_estimate<R: Rng + ?Sized>(
    p_true: f64,
    shots_per_depth: u64,
    grover_depths: &[u64],
    rng: &mut R,
) -> Result<f64> {
    check_probability(p_true)?;
    if shots_per_depth == 0 || grover_depths.is_empty() {
        return Err(Error::invalid("shots", shots_per_depth as f64, "need shots and at least one depth"));
    }
    let theta = p_true.sqrt().asin();
    let data: Vec<(f64, f64, f64)> = grover_depths
        .iter()
        .map(|&m| {
            let k = (2 * m + 1) as f64;
            let p = (k * theta).sin().powi(2).clamp(0.0, 1.0);
            let hits = Binomial::new(shots_per_depth, p).expect("clamped probability").sample(rng);
            (k, hits as f64, (shots_per_depth - hits) as f64)
        })
        .collect();
    if grover_depths.iter().all(|&m| m == 0) {
        let (hits, total) = data.iter().fold((0.0, 0.0), |(h, n), d| (h + d.1, n + d.1 + d.2));
        return Ok(hits / total);
    }
    let log_lik = |th: f64| -> f64 {
        data.iter()
            .map(|&(k, h, f)| {
                let s = (k * th).sin().powi(2);
                let term = |n: f64, q: f64| if n == 0.0 { 0.0 } else { n * q.ln() };
                term(h, s) + term(f, 1.0 - s)
            })
            .sum()
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let step = half_pi / THETA_GRID as f64;
    let (best, _) = (0..=THETA_GRID)
        .map(|i| {
            let th = i as f64 * step;
            (th, log_lik(th))
        })
        .fold((0.0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let (mut lo, mut hi) = ((best - step).max(0.0), (best + step).min(half_pi));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..REFINE_STEPS {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if log_lik(a) >= log_lik(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let mid = 0.5 * (lo + hi);
    let th = if log_lik(mid) > log_lik(best) { mid } else { best };
    Ok(th.sin().powi(2))
}

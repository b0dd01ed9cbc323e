//! Small statistics kit: running moments, deterministic parallel folds,
//! normal CDF, regression and goodness-of-fit helpers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

/// Paths per work unit. Fixed so the reduction tree never depends on the
/// number of workers.
pub const CHUNK: u64 = 1024;

/// Running mean/variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Accumulator {
    pub count: u64,
    pub mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * (self.count as f64) * (other.count as f64) / n;
        self.count += other.count;
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.m2 / (self.count - 1) as f64).max(0.0)
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::new();
        iter.into_iter().for_each(|x| acc.push(x));
        acc
    }
}

/// Folds items `0..n` in chunks of [`CHUNK`] on the rayon pool and merges
/// the chunk results left to right. The result is bit-identical for any
/// pool size.
pub fn par_fold<T, I, F, M>(n: u64, identity: I, fold: F, merge: M) -> T
where
    T: Send,
    I: Fn() -> T + Sync,
    F: Fn(&mut T, u64) + Sync,
    M: Fn(&mut T, T),
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = identity();
            let end = ((c + 1) * CHUNK).min(n);
            for i in c * CHUNK..end {
                fold(&mut acc, i);
            }
            acc
        })
        .collect();
    let mut total = identity();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

/// Fallible variant of [`par_fold`]; the first error in index order wins.
pub fn try_par_fold<T, E, I, F, M>(n: u64, identity: I, fold: F, merge: M) -> Result<T, E>
where
    T: Send,
    E: Send,
    I: Fn() -> T + Sync,
    F: Fn(&mut T, u64) -> Result<(), E> + Sync,
    M: Fn(&mut T, T),
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<T, E>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = identity();
            let end = ((c + 1) * CHUNK).min(n);
            for i in c * CHUNK..end {
                fold(&mut acc, i)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = identity();
    for p in parts {
        merge(&mut total, p?);
    }
    Ok(total)
}

/// Mean/variance of `f(i)` for `i in 0..n`, deterministic under parallelism.
pub fn par_accumulate<F>(n: u64, f: F) -> Accumulator
where
    F: Fn(u64) -> f64 + Sync,
{
    par_fold(n, Accumulator::new, |acc, i| acc.push(f(i)), |a, b| a.merge(&b))
}

pub fn try_par_accumulate<F, E>(n: u64, f: F) -> Result<Accumulator, E>
where
    F: Fn(u64) -> Result<f64, E> + Sync,
    E: Send,
{
    try_par_fold(
        n,
        Accumulator::new,
        |acc, i| {
            acc.push(f(i)?);
            Ok(())
        },
        |a, b| a.merge(&b),
    )
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Ordinary least squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    /// Two-sided 95% confidence interval for the slope (Student t).
    pub slope_ci: (f64, f64),
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "need at least two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (se, half) = if x.len() > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, yi)| (yi - intercept - slope * xi).powi(2))
            .sum();
        let dof = n - 2.0;
        let se = (rss / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof)
            .map(|d| d.inverse_cdf(0.975))
            .unwrap_or(f64::NAN);
        (se, t * se)
    } else {
        (f64::NAN, f64::NAN)
    };
    LinearFit {
        slope,
        intercept,
        slope_std_error: se,
        slope_ci: (slope - half, slope + half),
    }
}

/// Pearson chi-square statistic for observed counts against expected counts.
pub fn chi_square_statistic(observed: &[u64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| (o as f64 - e).powi(2) / e)
        .sum()
}

/// Upper critical value of the chi-square distribution at `alpha`.
pub fn chi_square_critical(dof: f64, alpha: f64) -> f64 {
    ChiSquared::new(dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - alpha)
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
/// Sorts `samples` in place.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value for sample size `n` at level `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Composite Simpson rule on `[a, b]` with `intervals` (rounded up to even).
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * h);
    }
    sum * h / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn welford_matches_two_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.5 - 3.0).collect();
        let acc: Accumulator = xs.iter().copied().collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!(close(acc.mean, mean, 1e-13));
        assert!(close(acc.variance(), var, 1e-12));

        let mut left: Accumulator = xs[..317].iter().copied().collect();
        let right: Accumulator = xs[317..].iter().copied().collect();
        left.merge(&right);
        assert!(close(left.mean, mean, 1e-13));
        assert!(close(left.variance(), var, 1e-12));
    }

    #[test]
    fn par_fold_independent_of_pool_size() {
        let f = |i: u64| ((i as f64) * 0.618).sin();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| par_accumulate(10_000, f));
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| par_accumulate(10_000, f));
        assert_eq!(one.mean.to_bits(), four.mean.to_bits());
        assert_eq!(one.variance().to_bits(), four.variance().to_bits());
    }

    #[test]
    fn normal_cdf_reference_points() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-8.0) - 6.220_960_574_271_78e-16).abs() < 1e-24);
    }

    #[test]
    fn linear_fit_exact_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let fit = linear_fit(&x, &y);
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_integrates_cubic_exactly() {
        let v = simpson(|x| x * x * x - x, 0.0, 2.0, 2);
        assert!((v - 2.0).abs() < 1e-12);
    }
}

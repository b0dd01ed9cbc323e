//! Empirical verification of the error bounds.
//!
//! Each probe returns a [`BoundReport`]: one row per grid point with the
//! measured quantity, its bound and a pass flag. Comparisons between a path
//! and its approximation always share randomness, either through common
//! coefficients or through Brownian-bridge refinement.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::klcore::{
    pi_sin_cos, tail_variance_bound, truncation_index_bm, wiener_eval_trig, TruncationReport,
};
use crate::pricing::{
    price_baseline, price_subsample, round_down_index, subsample_grid_size, AsianPayoffSpec,
    Estimate,
};
use crate::process::{sample_coefficients, GbmParams, GridKind, TimeGrid, DEFAULT_CLIP};
use crate::rng::{derive_seed, StreamFamily};
use crate::stats::{linear_fit, par_fold, simpson, try_par_fold, Accumulator, LinearFit};

/// Version of the CSV/JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Multiplicative headroom added to every statistical tolerance.
pub const HEADROOM: f64 = 0.15;

/// One bound checked over a parameter grid.
///
/// `pass[i]` holds iff `measured[i] ≤ bound_values[i] · (1 + stat_tolerance)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub schema_version: u32,
    pub bound_name: String,
    pub parameter_names: Vec<String>,
    /// One row per grid point, aligned with `parameter_names`.
    pub parameter_grid: Vec<Vec<f64>>,
    pub measured: Vec<f64>,
    pub measured_std_error: Vec<f64>,
    pub bound_values: Vec<f64>,
    pub pass: Vec<bool>,
    pub stat_tolerance: f64,
    pub n_samples: u64,
    pub seed: u64,
    /// Additional per-point columns.
    pub columns: BTreeMap<String, Vec<f64>>,
    /// Report-level scalars.
    pub summary: BTreeMap<String, f64>,
    /// Log-log regression where the probe measures a scaling.
    pub fit: Option<LinearFit>,
}

impl BoundReport {
    fn new(bound_name: &str, parameter_names: &[&str], n_samples: u64, seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            bound_name: bound_name.to_string(),
            parameter_names: parameter_names.iter().map(|s| s.to_string()).collect(),
            parameter_grid: Vec::new(),
            measured: Vec::new(),
            measured_std_error: Vec::new(),
            bound_values: Vec::new(),
            pass: Vec::new(),
            stat_tolerance: HEADROOM,
            n_samples,
            seed,
            columns: BTreeMap::new(),
            summary: BTreeMap::new(),
            fit: None,
        }
    }

    fn push(&mut self, params: Vec<f64>, measured: f64, std_error: f64, bound: f64) {
        debug_assert_eq!(params.len(), self.parameter_names.len());
        self.parameter_grid.push(params);
        self.measured.push(measured);
        self.measured_std_error.push(std_error);
        self.bound_values.push(bound);
    }

    fn column(&mut self, name: &str, value: f64) {
        self.columns.entry(name.to_string()).or_default().push(value);
    }

    /// Headroom plus three standard errors relative to the bound, at the
    /// loosest point.
    fn finish_clt(self) -> Self {
        let rel = self
            .measured_std_error
            .iter()
            .zip(&self.bound_values)
            .filter(|(_, b)| **b > 0.0)
            .map(|(se, b)| se / b)
            .fold(0.0, f64::max);
        self.finish(HEADROOM + 3.0 * rel)
    }

    fn finish(mut self, stat_tolerance: f64) -> Self {
        self.stat_tolerance = stat_tolerance;
        self.pass = self
            .measured
            .iter()
            .zip(&self.bound_values)
            .map(|(m, b)| *m <= b * (1.0 + stat_tolerance))
            .collect();
        self.summary
            .insert("all_pass".into(), if self.all_pass() { 1.0 } else { 0.0 });
        self
    }

    pub fn all_pass(&self) -> bool {
        self.pass.iter().all(|p| *p)
    }

    pub fn len(&self) -> usize {
        self.measured.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measured.is_empty()
    }

    pub fn extra(&self, name: &str) -> Option<&[f64]> {
        self.columns.get(name).map(|v| v.as_slice())
    }

    /// CSV with columns: parameters, `measured`, `measured_std_error`,
    /// `bound`, `pass`, then extra columns in name order.
    pub fn write_csv_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = self.parameter_names.clone();
        header.extend(["measured", "measured_std_error", "bound", "pass"].map(String::from));
        header.extend(self.columns.keys().cloned());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.parameter_grid[i].iter().map(|v| v.to_string()).collect();
            row.push(self.measured[i].to_string());
            row.push(self.measured_std_error[i].to_string());
            row.push(self.bound_values[i].to_string());
            row.push(self.pass.get(i).copied().unwrap_or(false).to_string());
            row.extend(self.columns.values().map(|c| c[i].to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string()? + "\n")?;
        Ok(())
    }
}

fn monotone_decreasing_3sigma(values: &[f64], se: &[f64]) -> bool {
    values
        .windows(2)
        .zip(se.windows(2))
        .all(|(v, s)| v[1] - v[0] <= 3.0 * (s[0] * s[0] + s[1] * s[1]).sqrt())
}

fn log_log_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 || pts.len() != x.len() {
        return None;
    }
    let (lx, ly): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Some(linear_fit(&lx, &ly))
}

fn insert_fit(report: &mut BoundReport, fit: Option<LinearFit>) {
    if let Some(f) = fit {
        report.summary.insert("slope".into(), f.slope);
        report.summary.insert("slope_ci_low".into(), f.slope_ci.0);
        report.summary.insert("slope_ci_high".into(), f.slope_ci.1);
    }
    report.fit = fit;
}

/// `sup_t E[(B_L(t) − B_{L_ref}(t))²]` over `t_grid` for each `L`, with the
/// two series sharing coefficients, against `2/(π²L)`.
///
/// `L = L_ref` is allowed and measures zero; any other `L` needs
/// `L_ref ≥ 8L` so the reference tail is negligible.
pub fn truncation_error_sweep(
    l_values: &[usize],
    l_ref: usize,
    n_paths: u64,
    t_grid: &TimeGrid,
    seed: u64,
) -> Result<BoundReport> {
    if l_values.is_empty() {
        return Err(Error::invalid("L", 0.0, "need at least one truncation level"));
    }
    for &l in l_values {
        if l == 0 {
            return Err(Error::invalid("L", 0.0, "truncation level must be >= 1"));
        }
        if l != l_ref && l_ref < 8 * l {
            return Err(Error::invalid("L_ref", l_ref as f64, "need L_ref >= 8 max(L)"));
        }
    }
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", n_paths as f64, "need at least two paths"));
    }
    let times = t_grid.points();
    let nt = times.len();
    let nl = l_values.len();
    let mut order: Vec<usize> = (0..nl).collect();
    order.sort_by(|&a, &b| l_values[b].cmp(&l_values[a]));

    // On t_j = j/N, sin(kπt_j) depends only on k mod 2N, so tails reduce to
    // 2N folded sums per level.
    let fold = (t_grid.kind() == GridKind::Monitoring).then_some(nt);
    let period = fold.map_or(0, |n| 2 * n);
    let sin_table: Vec<f64> = match fold {
        Some(n) => (0..period)
            .flat_map(|r| (1..=n).map(move |j| (PI * ((r * j) % period) as f64 / n as f64).sin()))
            .collect(),
        None => Vec::new(),
    };
    let trig: Vec<(f64, f64)> = times.iter().map(|&t| pi_sin_cos(t)).collect();

    let family = StreamFamily::new(seed, "truncation-sweep");
    let scale = SQRT_2 / PI;
    let (accs, clips) = try_par_fold(
        n_paths,
        || (vec![Accumulator::new(); nl * nt], 0u64),
        |(accs, clips), i| -> Result<()> {
            let (coeffs, c) = sample_coefficients(&mut family.stream(i), l_ref, DEFAULT_CLIP)?;
            *clips += c;
            let a = coeffs.as_slice();
            if fold.is_some() {
                let mut buckets = vec![0.0; period];
                let mut upper = l_ref;
                for &li in &order {
                    let l = l_values[li];
                    for k in (l + 1..=upper).rev() {
                        buckets[k % period] += a[k] / k as f64;
                    }
                    upper = upper.min(l);
                    for j in 0..nt {
                        let d: f64 = buckets
                            .iter()
                            .enumerate()
                            .map(|(r, b)| b * sin_table[r * nt + j])
                            .sum::<f64>()
                            * scale;
                        accs[li * nt + j].push(d * d);
                    }
                }
            } else {
                for (li, &l) in l_values.iter().enumerate() {
                    let mut tail = a.to_vec();
                    tail[..=l.min(l_ref)].iter_mut().for_each(|x| *x = 0.0);
                    for (j, (&t, &(s, c))) in times.iter().zip(&trig).enumerate() {
                        let d = wiener_eval_trig(&tail, t, s, c);
                        accs[li * nt + j].push(d * d);
                    }
                }
            }
            Ok(())
        },
        |(a, c), (b, d)| {
            a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y));
            *c += d;
        },
    )?;

    let mut report = BoundReport::new("truncation_tail", &["L", "L_ref"], n_paths, seed);
    for (li, &l) in l_values.iter().enumerate() {
        let row = &accs[li * nt..(li + 1) * nt];
        let (j, best) = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.mean.total_cmp(&b.1.mean))
            .expect("non-empty grid");
        let expected = times
            .iter()
            .map(|&t| {
                (l + 1..=l_ref)
                    .rev()
                    .map(|k| {
                        let kf = k as f64;
                        2.0 * ((kf * PI * t).sin() / (kf * PI)).powi(2)
                    })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        let bound = tail_variance_bound(l)?;
        report.push(vec![l as f64, l_ref as f64], best.mean, best.std_error(), bound.closed);
        report.column("t_argmax", times[j]);
        report.column("expected_sup", expected);
        report.column("kl_tail_partial", bound.partial);
    }
    let below: Vec<usize> = (0..nl).filter(|&i| l_values[i] < l_ref).collect();
    let mut sorted = below.clone();
    sorted.sort_by_key(|&i| l_values[i]);
    let ms: Vec<f64> = sorted.iter().map(|&i| report.measured[i]).collect();
    let ses: Vec<f64> = sorted.iter().map(|&i| report.measured_std_error[i]).collect();
    let ls: Vec<f64> = sorted.iter().map(|&i| l_values[i] as f64).collect();
    report.summary.insert(
        "monotone_3sigma".into(),
        if monotone_decreasing_3sigma(&ms, &ses) { 1.0 } else { 0.0 },
    );
    report.summary.insert("clip_events".into(), clips as f64);
    insert_fit(&mut report, if ls.len() >= 2 { log_log_fit(&ls, &ms) } else { None });
    Ok(report.finish_clt())
}

/// One [`TruncationReport`] per row of a truncation sweep.
pub fn truncation_reports(report: &BoundReport) -> Vec<TruncationReport> {
    (0..report.len())
        .map(|i| TruncationReport {
            l: report.parameter_grid[i][0] as usize,
            analytic_tail_bound: report.bound_values[i],
            empirical_tail_mse: report.measured[i],
            epsilon_target: report.bound_values[i].sqrt(),
        })
        .collect()
}

const QUADRATURE_INTERVALS: usize = 8000;
const QUADRATURE_SPAN: f64 = 12.0;

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// `E[(e^X − e^{X+Z})²]` for `X ~ N(μ, σ²)`, `Z ~ N(0, ε²)` by two
/// independent one-dimensional Simpson rules (the integrand factorizes).
pub fn mapped_bound_quadrature(mu: f64, sigma: f64, epsilon: f64) -> f64 {
    let s = QUADRATURE_SPAN;
    let ex = if sigma == 0.0 {
        (2.0 * mu).exp()
    } else {
        simpson(|z| (2.0 * (mu + sigma * z)).exp() * std_normal_pdf(z), -s, s, QUADRATURE_INTERVALS)
    };
    let ez = simpson(
        |z| (epsilon * z).exp_m1().powi(2) * std_normal_pdf(z),
        -s,
        s,
        QUADRATURE_INTERVALS,
    );
    ex * ez
}

/// Closed form `e^{2μ+2σ²}(e^{2ε²} − 2e^{ε²/2} + 1)`.
pub fn mapped_bound_exact(mu: f64, sigma: f64, epsilon: f64) -> f64 {
    let e2 = epsilon * epsilon;
    (2.0 * mu + 2.0 * sigma * sigma).exp() * ((2.0 * e2).exp_m1() - 2.0 * (0.5 * e2).exp_m1())
}

/// Measures `E[(e^X − e^{X+Z})²]` against `C₁ε²`, `C₁ = e^{σ² + 2μ}`.
///
/// All ε share the same `(X, z)` draws with `Z = εz`.
pub fn verify_mapped_bound(
    mu: f64,
    sigma: f64,
    eps_values: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<BoundReport> {
    if !mu.is_finite() || !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", sigma, "need finite mu and sigma >= 0"));
    }
    if let Some(&e) = eps_values.iter().find(|e| !(**e >= 0.0 && **e <= 0.5)) {
        return Err(Error::invalid("epsilon", e, "must lie in [0, 0.5]"));
    }
    if n_samples < 2 {
        return Err(Error::invalid("n_samples", n_samples as f64, "need at least two samples"));
    }
    let family = StreamFamily::new(seed, "mapped-bound");
    let ne = eps_values.len();
    let accs = par_fold(
        n_samples,
        || vec![Accumulator::new(); ne],
        |accs, i| {
            let mut rng = family.stream(i);
            let x = mu + sigma * rng.sample::<f64, _>(StandardNormal);
            let z: f64 = rng.sample(StandardNormal);
            let ex = x.exp();
            for (acc, &e) in accs.iter_mut().zip(eps_values) {
                let d = ex * (e * z).exp_m1();
                acc.push(d * d);
            }
        },
        |a, b| a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y)),
    );
    let c1 = (sigma * sigma + 2.0 * mu).exp();
    let mut report = BoundReport::new("mapped_process_l2", &["epsilon", "mu", "sigma"], n_samples, seed);
    let mut max_z = 0.0f64;
    for (acc, &e) in accs.iter().zip(eps_values) {
        let quad = mapped_bound_quadrature(mu, sigma, e);
        let se = acc.std_error();
        let z = if se > 0.0 { (acc.mean - quad) / se } else { 0.0 };
        max_z = max_z.max(z.abs());
        report.push(vec![e, mu, sigma], acc.mean, se, c1 * e * e);
        report.column("quadrature", quad);
        report.column("exact", mapped_bound_exact(mu, sigma, e));
        report.column("oracle_z", z);
        report.column("ratio_to_bound", if e > 0.0 { acc.mean / (c1 * e * e) } else { 0.0 });
    }
    report.summary.insert("c1".into(), c1);
    report.summary.insert("max_abs_oracle_z".into(), max_z);
    Ok(report.finish_clt())
}

/// Measures `E[(B_L(t) − B_L(s))²]` on truncated paths at `L = L_X(ε)`
/// against `3 C_M L (t − s)² + 6ε²` with `C_M = 1`. The `C_M = 2` bound of
/// this basis and the exact Brownian value `|t − s|` are reported alongside.
pub fn smoothness_probe(epsilon: f64, pairs: &[(f64, f64)], n_paths: u64, seed: u64) -> Result<BoundReport> {
    let l = truncation_index_bm(epsilon)?;
    for &(s, t) in pairs {
        crate::klcore::check_time(s)?;
        crate::klcore::check_time(t)?;
    }
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", n_paths as f64, "need at least two paths"));
    }
    let family = StreamFamily::new(seed, "smoothness");
    let np = pairs.len();
    let trig: Vec<[(f64, f64); 2]> = pairs
        .iter()
        .map(|&(s, t)| [pi_sin_cos(s), pi_sin_cos(t)])
        .collect();
    let accs = try_par_fold(
        n_paths,
        || vec![Accumulator::new(); np],
        |accs, i| -> Result<()> {
            let (coeffs, _) = sample_coefficients(&mut family.stream(i), l, DEFAULT_CLIP)?;
            let a = coeffs.as_slice();
            for ((acc, &(s, t)), tr) in accs.iter_mut().zip(pairs).zip(&trig) {
                let bs = wiener_eval_trig(a, s, tr[0].0, tr[0].1);
                let bt = wiener_eval_trig(a, t, tr[1].0, tr[1].1);
                acc.push((bt - bs).powi(2));
            }
            Ok(())
        },
        |a, b| a.iter_mut().zip(&b).for_each(|(x, y)| x.merge(y)),
    )?;
    let lf = l as f64;
    let e2 = epsilon * epsilon;
    let mut report = BoundReport::new("kl_smoothness", &["s", "t"], n_paths, seed);
    for (acc, &(s, t)) in accs.iter().zip(pairs) {
        let d2 = (t - s).powi(2);
        let expected = d2
            + 2.0 / (PI * PI)
                * (1..=l)
                    .rev()
                    .map(|k| {
                        let kf = k as f64;
                        (((kf * PI * t).sin() - (kf * PI * s).sin()) / kf).powi(2)
                    })
                    .sum::<f64>();
        report.push(vec![s, t], acc.mean, acc.std_error(), 3.0 * lf * d2 + 6.0 * e2);
        report.column("bound_cm2", 6.0 * lf * d2 + 6.0 * e2);
        report.column("exact_bm", (t - s).abs());
        report.column("expected_truncated", expected);
    }
    report.summary.insert("truncation".into(), lf);
    report.summary.insert("epsilon".into(), epsilon);
    report.summary.insert("mercer_constant_stated".into(), 1.0);
    report.summary.insert("mercer_constant_basis".into(), 2.0);
    Ok(report.finish_clt())
}

/// Coupled payoff error of round-down sub-sampling.
///
/// Each path is generated on the grid `k/M` first and then refined to the
/// monitoring dates by Brownian bridges, so both payoffs see one Brownian
/// path. Measures `E[(f(S_{c(t)}) − f(S_t))²]`; the bound is the payoff
/// Lipschitz bound `maxᵢ E[(S_{c(tᵢ)} − S_{tᵢ})²]`, computed exactly.
pub fn subsample_error_probe(
    params: &GbmParams,
    spec: &AsianPayoffSpec,
    eps_values: &[f64],
    n_paths: u64,
    seed: u64,
) -> Result<BoundReport> {
    if eps_values.is_empty() {
        return Err(Error::invalid("epsilon", 0.0, "need at least one epsilon"));
    }
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", n_paths as f64, "need at least two paths"));
    }
    let times = spec.monitoring_grid().points().to_vec();
    let mut report = BoundReport::new(
        "subsample_payoff_mse",
        &["epsilon", "M", "T"],
        n_paths,
        seed,
    );
    for (ei, &eps) in eps_values.iter().enumerate() {
        let m = subsample_grid_size(eps)?;
        let index: Vec<usize> = times.iter().map(|&t| round_down_index(t, m)).collect();
        let family = StreamFamily::new(derive_seed(seed, ei as u64), "subsample-probe");
        let acc = crate::stats::par_accumulate(n_paths, |i| {
            let (fine, coarse) = coupled_averages(&mut family.stream(i), params, spec, &times, &index, m);
            let k = spec.strike();
            ((coarse - k).max(0.0) - (fine - k).max(0.0)).powi(2)
        });
        let bound = times
            .iter()
            .zip(&index)
            .map(|(&t, &k)| params.increment_second_moment(k as f64 / m as f64, t))
            .fold(0.0, f64::max);
        report.push(vec![eps, m as f64, times.len() as f64], acc.mean, acc.std_error(), bound);
        report.column("fitted_c", acc.mean / (eps * eps));
    }
    for i in 1..eps_values.len() {
        let (prev, cur) = (report.measured[i - 1], report.measured[i]);
        if cur > 0.0 {
            report
                .summary
                .insert(format!("mse_ratio_{}_{}", eps_values[i - 1], eps_values[i]), prev / cur);
        }
    }
    let c = report.columns["fitted_c"].iter().copied().fold(0.0, f64::max);
    report.summary.insert("fitted_c".into(), c);
    Ok(report.finish_clt())
}

/// Weighted averages `(Σ wᵢ S(tᵢ), Σ wᵢ S(c(tᵢ)))` on one coupled path.
fn coupled_averages<R: Rng + ?Sized>(
    rng: &mut R,
    params: &GbmParams,
    spec: &AsianPayoffSpec,
    times: &[f64],
    index: &[usize],
    m: usize,
) -> (f64, f64) {
    let drift = params.effective_drift();
    let sigma = params.sigma;
    let dt = 1.0 / m as f64;
    let mut x = Vec::with_capacity(m + 1);
    x.push(params.s0.ln());
    for k in 0..m {
        let z: f64 = rng.sample(StandardNormal);
        x.push(x[k] + drift * dt + sigma * dt.sqrt() * z);
    }
    let mut fine = 0.0;
    let mut coarse = 0.0;
    let mut left = (f64::NAN, 0.0);
    let mut interval = usize::MAX;
    for ((&t, &k), &w) in times.iter().zip(index).zip(spec.weights()) {
        coarse += w * x[k].exp();
        let tk = k as f64 / m as f64;
        let xt = if (t - tk).abs() <= 1e-12 || k == m {
            x[k]
        } else {
            if k != interval {
                interval = k;
                left = (tk, x[k]);
            }
            let (tl, xl) = left;
            let tr = (k + 1) as f64 / m as f64;
            let xr = x[k + 1];
            let frac = (t - tl) / (tr - tl);
            let var = sigma * sigma * (t - tl) * (tr - t) / (tr - tl);
            let z: f64 = rng.sample(StandardNormal);
            let v = xl + frac * (xr - xl) + var.sqrt() * z;
            left = (t, v);
            v
        };
        fine += w * xt.exp();
    }
    (fine, coarse)
}

/// Estimator whose root-mean-square error is studied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMethod {
    Baseline,
    /// Sub-sampling at fixed `ε`.
    Subsample { epsilon: f64 },
}

impl ConvergenceMethod {
    fn run(&self, params: &GbmParams, spec: &AsianPayoffSpec, n: u64, seed: u64) -> Result<Estimate> {
        match *self {
            ConvergenceMethod::Baseline => price_baseline(params, spec, n, seed),
            ConvergenceMethod::Subsample { epsilon } => price_subsample(params, spec, epsilon, n, seed),
        }
    }
}

/// RMSE against `oracle` over `replications` seeds per budget, with a
/// log-log fit of RMSE on budget.
///
/// The per-point bound is the Monte Carlo standard error `sd/√n` plus a
/// machine-precision floor; the tolerance is headroom plus three standard
/// errors of an RMSE estimated from `R` replications, `3/√(2R)`.
pub fn convergence_study(
    method: ConvergenceMethod,
    params: &GbmParams,
    spec: &AsianPayoffSpec,
    oracle: f64,
    budgets: &[u64],
    replications: usize,
    seed: u64,
) -> Result<BoundReport> {
    if budgets.len() < 4 {
        return Err(Error::invalid("budgets", budgets.len() as f64, "need at least four budgets"));
    }
    if replications < 2 {
        return Err(Error::invalid("replications", replications as f64, "need at least two"));
    }
    let name = match method {
        ConvergenceMethod::Baseline => "convergence_baseline",
        ConvergenceMethod::Subsample { .. } => "convergence_subsample",
    };
    let r = replications as f64;
    let total: u64 = budgets.iter().sum::<u64>() * replications as u64;
    let mut report = BoundReport::new(name, &["n_outer"], total, seed);
    for (bi, &n) in budgets.iter().enumerate() {
        let budget_seed = derive_seed(seed, bi as u64);
        let mut sq = 0.0;
        let mut bias = 0.0;
        let mut sd = 0.0;
        for rep in 0..replications {
            let est = method.run(params, spec, n, derive_seed(budget_seed, rep as u64))?;
            let err = est.value - oracle;
            sq += err * err;
            bias += err;
            sd += est.std_error * (n as f64).sqrt();
        }
        let rmse = (sq / r).sqrt();
        let sd = sd / r;
        let floor = 64.0 * f64::EPSILON * oracle.abs().max(1.0);
        report.push(vec![n as f64], rmse, rmse / (2.0 * r).sqrt(), sd / (n as f64).sqrt() + floor);
        report.column("mean_error", bias / r);
        report.column("sd_hat", sd);
    }
    let ns: Vec<f64> = budgets.iter().map(|&n| n as f64).collect();
    let fit = log_log_fit(&ns, &report.measured.clone());
    insert_fit(&mut report, fit);
    report.summary.insert("oracle".into(), oracle);
    report.summary.insert("replications".into(), r);
    Ok(report.finish(HEADROOM + 3.0 / (2.0 * r).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_pass_invariant_and_csv() {
        let mut r = BoundReport::new("demo", &["x"], 10, 1);
        r.push(vec![1.0], 1.0, 0.0, 1.0);
        r.push(vec![2.0], 1.2, 0.0, 1.0);
        r.column("extra", 3.0);
        r.column("extra", 4.0);
        let r = r.finish(0.15);
        assert_eq!(r.pass, vec![true, false]);
        assert!(!r.all_pass());
        let csv = r.to_csv_string().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x,measured,measured_std_error,bound,pass,extra");
        assert_eq!(lines.next().unwrap(), "1,1,0,1,true,3");
        let back: BoundReport = serde_json::from_str(&r.to_json_string().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn truncation_self_reference_is_zero() {
        let grid = TimeGrid::uniform_monitoring(16).unwrap();
        let r = truncation_error_sweep(&[64], 64, 100, &grid, 1).unwrap();
        assert_eq!(r.measured[0], 0.0);
        assert!(truncation_error_sweep(&[16], 64, 100, &grid, 1).is_err());
    }

    #[test]
    fn folded_and_direct_tails_agree() {
        let folded = TimeGrid::uniform_monitoring(8).unwrap();
        let custom = TimeGrid::from_points(folded.points().to_vec()).unwrap();
        let a = truncation_error_sweep(&[4, 16], 256, 500, &folded, 2).unwrap();
        let b = truncation_error_sweep(&[4, 16], 256, 500, &custom, 2).unwrap();
        for (x, y) in a.measured.iter().zip(&b.measured) {
            assert!((x - y).abs() <= 1e-12 * y.max(1e-300), "{x} {y}");
        }
    }

    #[test]
    fn mapped_quadrature_matches_closed_form() {
        for &(mu, sigma, e) in &[(0.0, 0.0, 0.05), (0.0, 0.2, 0.1), (0.1, 0.3, 0.02)] {
            let q = mapped_bound_quadrature(mu, sigma, e);
            let x = mapped_bound_exact(mu, sigma, e);
            assert!((q / x - 1.0).abs() < 1e-9, "{q} {x}");
        }
        let r = verify_mapped_bound(0.0, 0.2, &[0.0, 0.1], 1000, 3).unwrap();
        assert_eq!(r.measured[0], 0.0);
        assert!(r.pass[0]);
    }

    #[test]
    fn smoothness_degenerate_pair() {
        let r = smoothness_probe(0.1, &[(0.3, 0.3), (0.2, 0.7)], 2000, 4).unwrap();
        assert_eq!(r.measured[0], 0.0);
        assert!((r.extra("exact_bm").unwrap()[1] - 0.5).abs() < 1e-15);
        assert!(r.all_pass());
    }

    #[test]
    fn subsample_probe_exact_when_grid_contains_dates() {
        let p = GbmParams::new(100.0, 0.05, 0.2).unwrap();
        let spec = AsianPayoffSpec::uniform(100.0, 16).unwrap();
        // M = 64 is a multiple of T = 16.
        let r = subsample_error_probe(&p, &spec, &[0.125], 1000, 5).unwrap();
        assert_eq!(r.measured[0], 0.0);
        assert_eq!(r.bound_values[0], 0.0);
    }

    #[test]
    fn bridge_refinement_preserves_marginals() {
        // Variance of ln S at a refined point must equal σ²t.
        let p = GbmParams::new(1.0, 0.0, 0.5).unwrap();
        let spec = AsianPayoffSpec::with_weights(0.0, vec![0.0, 1.0, 0.0]).unwrap();
        let times = [1.0 / 3.0, 2.0 / 3.0, 1.0];
        let m = 4;
        let index: Vec<usize> = times.iter().map(|&t| round_down_index(t, m)).collect();
        let fam = StreamFamily::new(6, "bridge");
        let acc = crate::stats::par_accumulate(200_000, |i| {
            coupled_averages(&mut fam.stream(i), &p, &spec, &times, &index, m).0.ln()
        });
        let target = 0.25 * 2.0 / 3.0;
        assert!((acc.variance() - target).abs() < 4.0 * target * (2.0f64 / 200_000.0).sqrt());
    }

    #[test]
    fn convergence_zero_variance() {
        let p = GbmParams::new(100.0, 0.05, 0.0).unwrap();
        let spec = AsianPayoffSpec::uniform(90.0, 8).unwrap();
        let oracle = (1..=8).map(|i| 100.0 * (0.05 * i as f64 / 8.0).exp()).sum::<f64>() / 8.0 - 90.0;
        let r = convergence_study(ConvergenceMethod::Baseline, &p, &spec, oracle, &[10, 20, 40, 80], 3, 1).unwrap();
        assert!(r.measured.iter().all(|m| *m < 1e-12));
        assert!(r.all_pass());
        assert!(convergence_study(ConvergenceMethod::Baseline, &p, &spec, oracle, &[10, 20, 40], 3, 1).is_err());
    }
}

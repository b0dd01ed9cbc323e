use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use klmc_core::analysis::{
    convergence_study, smoothness_probe, subsample_error_probe, truncation_error_sweep,
    verify_mapped_bound, BoundReport, ConvergenceMethod,
};
use klmc_core::golden::{self, compute_golden, golden_record};
use klmc_core::pricing::{
    geometric_asian_closed_form, price_baseline, price_kl_nested, price_subsample_with_rule,
    EnvelopeMode, InnerMode, KlNestedConfig, SubsampleRule,
};
use klmc_core::process::{g_max_bound, ProposalMode};
use klmc_core::qsim::{
    attach_value_rotation, build_semidigital_state, nested_payoff_probability, FixedPointCodec,
    RegisterLayout,
};
use klmc_core::rng::derive_seed;
use klmc_core::{AsianPayoffSpec, Estimate, GbmParams, Method};

use crate::args::*;

/// Coefficient clip used by the qsim check.
const QSIM_CLIP: f64 = 4.0;
const ORACLE_PATHS: u64 = 4_000_000;

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl From<klmc_core::Error> for Failure {
    fn from(e: klmc_core::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome<T> = Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Validation(msg.into())
}

pub fn dispatch(cli: Cli) -> Outcome<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(invalid("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Price(a) => run_price(&a),
        Command::Analyze(a) => run_analyze(&a),
        Command::Golden(a) => run_golden(&a),
    }
}

struct Market {
    params: GbmParams,
    spec: AsianPayoffSpec,
    seed: u64,
}

fn market(m: &MarketArgs) -> Outcome<Market> {
    if !(m.sigma > 0.0) {
        return Err(invalid(format!("--sigma must be positive, got {}", m.sigma)));
    }
    let params = GbmParams::new(m.s0, m.mu, m.sigma)?;
    let spec = AsianPayoffSpec::uniform(m.strike, m.monitoring)?;
    Ok(Market {
        params,
        spec,
        seed: m.seed.unwrap_or_else(rand::random),
    })
}

/// Field order is part of the output contract.
#[derive(Serialize)]
struct PriceOutput {
    value: f64,
    std_error: f64,
    method: Method,
    n_outer: u64,
    n_inner: u64,
    seed: u64,
    clip_events: u64,
    wall_time_ms: f64,
}

fn run_price(a: &PriceArgs) -> Outcome<()> {
    let Market { params, spec, seed } = market(&a.market)?;
    let spec = spec.with_discount(a.discount)?;
    let start = Instant::now();
    let est = match a.method {
        PriceMethod::Baseline => price_baseline(&params, &spec, a.paths, seed)?,
        PriceMethod::KlNested => {
            let mut cfg = KlNestedConfig::default_sizing(a.epsilon, 4.0)?;
            cfg.m0 = a.m0.unwrap_or(cfg.m0);
            cfg.m1 = a.m1.unwrap_or(cfg.m1);
            cfg.truncation = a.truncation;
            cfg.inner = match a.inner {
                InnerArg::AcceptanceRate => InnerMode::AcceptanceRate,
                InnerArg::UniformAverage => InnerMode::UniformAverage,
            };
            cfg.envelope = match a.envelope {
                EnvelopeArg::PerPath => EnvelopeMode::PerPath,
                EnvelopeArg::Global => EnvelopeMode::Global,
            };
            cfg.proposals = match a.proposals {
                ProposalArg::Continuous => ProposalMode::Continuous,
                ProposalArg::Snapped => ProposalMode::Snapped {
                    monitoring: spec.monitoring_count(),
                },
            };
            price_kl_nested(&params, &spec, &cfg, seed)?
        }
        PriceMethod::Subsample => {
            let rule = match a.rule {
                RuleArg::GridMean => SubsampleRule::GridMean,
                RuleArg::RoundDown => SubsampleRule::RoundDown,
            };
            price_subsample_with_rule(&params, &spec, a.epsilon, rule, a.paths, seed)?
        }
        PriceMethod::GeometricCf => {
            let v = geometric_asian_closed_form(&params, &spec.monitoring_grid(), spec.strike())?;
            Estimate {
                value: v * spec.discount(),
                std_error: 0.0,
                n_outer: 0,
                n_inner: 1,
                seed,
                method: Method::GeometricClosedForm,
                clip_events: 0,
            }
        }
        PriceMethod::QsimCheck => qsim_check(a, &params, &spec, seed)?,
    };
    let out = PriceOutput {
        value: est.value,
        std_error: est.std_error,
        method: est.method,
        n_outer: est.n_outer,
        n_inner: est.n_inner,
        seed: est.seed,
        clip_events: est.clip_events,
        wall_time_ms: start.elapsed().as_secs_f64() * 1e3,
    };
    let text = match a.format {
        Format::Json => serde_json::to_string(&out).expect("plain struct") + "\n",
        Format::Csv => format!(
            "value,std_error,method,n_outer,n_inner,seed,clip_events,wall_time_ms\n{},{},{},{},{},{},{},{}\n",
            out.value, out.std_error, out.method, out.n_outer, out.n_inner, out.seed, out.clip_events, out.wall_time_ms
        ),
    };
    emit(a.output.as_deref(), &text)
}

/// Exact statevector evaluation of the nested payoff on a tiny layout.
fn qsim_check(a: &PriceArgs, params: &GbmParams, spec: &AsianPayoffSpec, seed: u64) -> Outcome<Estimate> {
    let l = a.truncation.unwrap_or(1);
    let t = spec.monitoring_count();
    let layout = RegisterLayout::new(a.qubits, l + 1, RegisterLayout::time_width(t), a.codec_bits, 0)?;
    layout.with_extra_ancillas(1)?;
    let gmax = g_max_bound(params, l, QSIM_CLIP)?.value;
    let codec = FixedPointCodec::for_range(a.codec_bits, gmax)?;
    let state = build_semidigital_state(&layout, params, l, t, QSIM_CLIP, &codec)?;
    let rotated = attach_value_rotation(&state, gmax)?;
    let p = nested_payoff_probability(&rotated, 0, gmax, spec.strike(), gmax)?;
    Ok(Estimate {
        value: p * gmax * spec.discount(),
        std_error: 0.0,
        n_outer: 1u64 << layout.coeff_width(),
        n_inner: t as u64,
        seed,
        method: Method::QsimCheck,
        clip_events: state.saturations(),
    })
}

fn emit(path: Option<&Path>, text: &str) -> Outcome<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn parse_pairs(raw: &[String]) -> Outcome<Vec<(f64, f64)>> {
    raw.iter()
        .map(|p| {
            let (s, t) = p
                .split_once(':')
                .ok_or_else(|| invalid(format!("pair `{p}` must look like s:t")))?;
            let parse = |x: &str| x.trim().parse::<f64>().map_err(|_| invalid(format!("bad number in pair `{p}`")));
            Ok((parse(s)?, parse(t)?))
        })
        .collect()
}

fn first_epsilon(a: &AnalyzeArgs) -> Outcome<f64> {
    a.epsilon.first().copied().ok_or_else(|| invalid("--epsilon needs a value"))
}

fn is_golden_market(m: &MarketArgs) -> bool {
    m.s0 == golden::GOLDEN_S0
        && m.mu == golden::GOLDEN_MU
        && m.sigma == golden::GOLDEN_SIGMA
        && m.strike == golden::GOLDEN_STRIKE
        && m.monitoring == golden::GOLDEN_MONITORING
}

#[derive(Serialize)]
struct AnalyzeOutput<'a> {
    probe: &'a str,
    bound_name: &'a str,
    all_pass: bool,
    seed: u64,
    n_samples: u64,
    stat_tolerance: f64,
    summary: &'a std::collections::BTreeMap<String, f64>,
    slope: Option<f64>,
    slope_ci: Option<(f64, f64)>,
    csv: PathBuf,
    json: PathBuf,
}

fn run_analyze(a: &AnalyzeArgs) -> Outcome<()> {
    let Market { params, spec, seed } = market(&a.market)?;
    let (name, report): (&str, BoundReport) = match a.probe {
        Probe::Truncation => {
            let grid = klmc_core::TimeGrid::uniform_monitoring(a.grid)?;
            ("truncation", truncation_error_sweep(&a.levels, a.l_ref, a.paths, &grid, seed)?)
        }
        Probe::Mapped => ("mapped", verify_mapped_bound(params.mu, params.sigma, &a.epsilon, a.paths, seed)?),
        Probe::Smoothness => {
            let pairs = parse_pairs(&a.pairs)?;
            ("smoothness", smoothness_probe(first_epsilon(a)?, &pairs, a.paths, seed)?)
        }
        Probe::Subsample => ("subsample", subsample_error_probe(&params, &spec, &a.epsilon, a.paths, seed)?),
        Probe::Convergence => {
            let method = match a.method {
                ConvergenceArg::Baseline => ConvergenceMethod::Baseline,
                ConvergenceArg::Subsample => ConvergenceMethod::Subsample {
                    epsilon: first_epsilon(a)?,
                },
            };
            let oracle = match a.oracle {
                Some(v) => v,
                None if is_golden_market(&a.market) => golden_record()?.value,
                None => price_baseline(&params, &spec, ORACLE_PATHS, derive_seed(seed, u64::MAX))?.value,
            };
            let r = convergence_study(method, &params, &spec, oracle, &a.budgets, a.replications, seed)?;
            ("convergence", r)
        }
    };
    fs::create_dir_all(&a.output)?;
    let csv = a.output.join(format!("{name}.csv"));
    let json = a.output.join(format!("{name}.json"));
    report.write_csv(&csv)?;
    report.write_json(&json)?;
    let out = AnalyzeOutput {
        probe: name,
        bound_name: &report.bound_name,
        all_pass: report.all_pass(),
        seed,
        n_samples: report.n_samples,
        stat_tolerance: report.stat_tolerance,
        summary: &report.summary,
        slope: report.fit.map(|f| f.slope),
        slope_ci: report.fit.map(|f| f.slope_ci),
        csv,
        json,
    };
    emit(None, &(serde_json::to_string(&out).expect("plain struct") + "\n"))?;
    if report.all_pass() {
        Ok(())
    } else {
        let failed = report.pass.iter().filter(|p| !**p).count();
        Err(Failure::Runtime(format!("{failed} of {} bound checks failed in `{name}`", report.len())))
    }
}

fn run_golden(a: &GoldenArgs) -> Outcome<()> {
    let record = compute_golden(a.paths, a.seed)?;
    let text = serde_json::to_string_pretty(&record).expect("plain struct") + "\n";
    emit(a.output.as_deref(), &text)
}

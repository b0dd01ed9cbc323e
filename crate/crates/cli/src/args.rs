use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Monte Carlo pricing of discretely monitored Asian options on GBM.
///
/// Results are JSON on stdout; failures are one JSON line on stderr.
/// Exit codes: 0 success, 1 runtime failure (including failed bound
/// checks), 2 invalid input.
#[derive(Debug, Parser)]
#[command(name = "klmc", version)]
pub struct Cli {
    /// Cap on worker threads. Results do not depend on it.
    #[arg(long, global = true, env = "KLMC_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Price the Asian call with one estimator.
    Price(PriceArgs),
    /// Run an analysis probe and write CSV plus JSON reports.
    Analyze(AnalyzeArgs),
    /// Recompute the seed-pinned golden reference value.
    Golden(GoldenArgs),
}

#[derive(Debug, Args)]
pub struct MarketArgs {
    /// Initial price.
    #[arg(long, default_value_t = 100.0)]
    pub s0: f64,
    /// Drift per unit time.
    #[arg(long, default_value_t = 0.05, allow_hyphen_values = true)]
    pub mu: f64,
    /// Volatility, strictly positive.
    #[arg(long, default_value_t = 0.2, allow_hyphen_values = true)]
    pub sigma: f64,
    /// Strike.
    #[arg(long, default_value_t = 100.0, allow_hyphen_values = true)]
    pub strike: f64,
    /// Number of monitoring dates.
    #[arg(long = "T", default_value_t = 64)]
    pub monitoring: usize,
    /// Seed; drawn from entropy and echoed when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriceMethod {
    Baseline,
    KlNested,
    Subsample,
    GeometricCf,
    QsimCheck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InnerArg {
    AcceptanceRate,
    UniformAverage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProposalArg {
    Continuous,
    Snapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnvelopeArg {
    PerPath,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    GridMean,
    RoundDown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct PriceArgs {
    /// Estimator to run.
    #[arg(long, value_enum, default_value_t = PriceMethod::Baseline)]
    pub method: PriceMethod,
    #[command(flatten)]
    pub market: MarketArgs,
    /// Target accuracy; sets L, M and default nested sizes.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Outer paths for baseline and subsample.
    #[arg(long, default_value_t = 100_000)]
    pub paths: u64,
    /// Outer coefficient samples for kl-nested [default: ceil(4/epsilon^2)].
    #[arg(long)]
    pub m0: Option<u64>,
    /// Inner samples per path for kl-nested [default: ceil(4/epsilon^2)].
    #[arg(long)]
    pub m1: Option<u64>,
    /// Truncation level for kl-nested and qsim-check [default: L_X(epsilon), 1 for qsim-check].
    #[arg(long = "L")]
    pub truncation: Option<usize>,
    /// Inner estimator of kl-nested.
    #[arg(long, value_enum, default_value_t = InnerArg::AcceptanceRate)]
    pub inner: InnerArg,
    /// Time proposals of kl-nested.
    #[arg(long, value_enum, default_value_t = ProposalArg::Continuous)]
    pub proposals: ProposalArg,
    /// Rejection envelope of kl-nested.
    #[arg(long, value_enum, default_value_t = EnvelopeArg::PerPath)]
    pub envelope: EnvelopeArg,
    /// Payoff rule of subsample.
    #[arg(long, value_enum, default_value_t = RuleArg::GridMean)]
    pub rule: RuleArg,
    /// Qubits per coefficient register for qsim-check.
    #[arg(long, default_value_t = 2)]
    pub qubits: usize,
    /// Value-register width for qsim-check.
    #[arg(long, default_value_t = 8)]
    pub codec_bits: usize,
    /// Factor applied to the final value.
    #[arg(long, default_value_t = 1.0)]
    pub discount: f64,
    /// Estimate encoding.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Output file [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Probe {
    Truncation,
    Mapped,
    Smoothness,
    Subsample,
    Convergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConvergenceArg {
    Baseline,
    Subsample,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Bound to verify.
    #[arg(long, value_enum)]
    pub probe: Probe,
    #[command(flatten)]
    pub market: MarketArgs,
    /// Truncation levels for the truncation probe.
    #[arg(long = "L", value_delimiter = ',', default_value = "8,32,128")]
    pub levels: Vec<usize>,
    /// Reference truncation level.
    #[arg(long = "L-ref", default_value_t = 4096)]
    pub l_ref: usize,
    /// Epsilon values (mapped, subsample) or the single epsilon of smoothness and convergence.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.05")]
    pub epsilon: Vec<f64>,
    /// Time points of the truncation sweep, t = j/N.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Samples per grid point.
    #[arg(long, default_value_t = 100_000)]
    pub paths: u64,
    /// (s,t) pairs of the smoothness probe, as s:t.
    #[arg(long, value_delimiter = ',', default_value = "0.2:0.7,0.5:0.52,0.1:0.11,0:1,0.3:0.3")]
    pub pairs: Vec<String>,
    /// Estimator studied by the convergence probe.
    #[arg(long, value_enum, default_value_t = ConvergenceArg::Baseline)]
    pub method: ConvergenceArg,
    /// Sample budgets of the convergence probe.
    #[arg(long, value_delimiter = ',', default_value = "1000,4000,16000,64000")]
    pub budgets: Vec<u64>,
    /// Seeds per budget in the convergence probe.
    #[arg(long, default_value_t = 50)]
    pub replications: usize,
    /// Reference price for the convergence probe [default: golden value at
    /// golden parameters, else a 4e6-path baseline run].
    #[arg(long, allow_hyphen_values = true)]
    pub oracle: Option<f64>,
    /// Directory for `<probe>.csv` and `<probe>.json`.
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct GoldenArgs {
    #[arg(long, default_value_t = klmc_core::golden::GOLDEN_PATHS)]
    pub paths: u64,
    #[arg(long, default_value_t = klmc_core::golden::GOLDEN_SEED)]
    pub seed: u64,
    /// Output file [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

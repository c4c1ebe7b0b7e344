//! `linattn`: verification suites, approximation reports, scaling sweeps and
//! the feature-map attention demo.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or configuration
//! error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use linattn::bench::{Metric, Precision, DEFAULT_MEMORY_BUDGET};
use linattn::{AttentionMechanism, DEFAULT_EPS};

/// Relative `--out` paths are resolved against this directory when set.
pub const OUT_DIR_ENV: &str = "LINATTN_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "linattn", version, about = "Attention-kernel laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the oracle-equivalence and property suites; JSON summary on stdout.
    Verify(VerifyArgs),
    /// Compare two mechanisms on a seeded workload; ApproxReport JSON on stdout.
    Compare(CompareArgs),
    /// Time a mechanism over a sweep of N; CSV records plus log-log slope fits.
    Bench(BenchArgs),
    /// Apply an attention layer with identity residual to a feature map.
    Apply(ApplyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Fit {
    Time,
    #[value(name = "aux_memory", alias = "aux-memory")]
    AuxMemory,
    Both,
    None,
}

impl Fit {
    fn metrics(self) -> Vec<Metric> {
        match self {
            Fit::Time => vec![Metric::Time],
            Fit::AuxMemory => vec![Metric::AuxMemory],
            Fit::Both => vec![Metric::Time, Metric::AuxMemory],
            Fit::None => vec![],
        }
    }
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPS, value_parser = parse_eps)]
    eps: f64,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Mechanisms covered by the all-mechanism suites (comma list).
    #[arg(long, value_delimiter = ',', value_parser = parse_mechanism)]
    mechanism: Vec<AttentionMechanism>,
    /// Largest sequence length in the instance family.
    #[arg(long, default_value_t = 64, value_parser = positive)]
    n: usize,
    #[arg(long, default_value_t = 16, value_parser = positive)]
    dk: usize,
    #[arg(long, default_value_t = 16, value_parser = positive)]
    dv: usize,
    /// Number of seeded instances per suite.
    #[arg(long, default_value_t = 1000, value_parser = positive)]
    instances: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPS, value_parser = parse_eps)]
    eps: f64,
    /// Exactly two mechanisms: `a,b`.
    #[arg(
        long,
        value_delimiter = ',',
        value_parser = parse_mechanism,
        default_value = "linear_vectorized,softmax_normalized_qk"
    )]
    mechanism: Vec<AttentionMechanism>,
    #[arg(long, default_value_t = 256, value_parser = positive)]
    n: usize,
    #[arg(long, default_value_t = 32, value_parser = positive)]
    dk: usize,
    #[arg(long, default_value_t = 32, value_parser = positive)]
    dv: usize,
    /// Input width; defaults to --dk.
    #[arg(long, value_parser = positive)]
    dx: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    /// Mechanisms to sweep (comma list).
    #[arg(long, value_delimiter = ',', value_parser = parse_mechanism, default_value = "linear_vectorized")]
    mechanism: Vec<AttentionMechanism>,
    /// Sequence lengths (comma list). Defaults depend on the mechanism.
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 32, value_parser = positive)]
    dk: usize,
    #[arg(long, default_value_t = 32, value_parser = positive)]
    dv: usize,
    #[arg(long, value_parser = positive)]
    dx: Option<usize>,
    #[arg(long, default_value_t = 5, value_parser = positive)]
    repeats: usize,
    /// CSV (or JSON) records go here; stdout otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Metric to fit a log-log slope to.
    #[arg(long, value_enum, default_value_t = Fit::Time)]
    fit: Fit,
    /// Slope-fit JSON goes here; stderr otherwise.
    #[arg(long)]
    fit_out: Option<PathBuf>,
    #[arg(long, default_value = "f32", value_parser = parse_precision)]
    precision: Precision,
    /// Byte cap for an N x N weight matrix.
    #[arg(long, default_value_t = DEFAULT_MEMORY_BUDGET)]
    memory_budget: u64,
}

#[derive(Debug, Args)]
struct ApplyArgs {
    #[command(flatten)]
    common: Common,
    /// Input feature map (TSR with `<file>.json` sidecar).
    #[arg(long = "in")]
    input: PathBuf,
    /// Directory with wq.tsr, wk.tsr, wv.tsr; seeded weights otherwise.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, value_parser = parse_mechanism, default_value = "linear_vectorized")]
    mechanism: AttentionMechanism,
    /// Query/key width for seeded weights; defaults to the channel count.
    #[arg(long, value_parser = positive)]
    dk: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_eps(s: &str) -> Result<f64, String> {
    let eps: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if eps > 0.0 && eps.is_finite() {
        Ok(eps)
    } else {
        Err(format!("eps must be positive (got {s})"))
    }
}

fn parse_mechanism(s: &str) -> Result<AttentionMechanism, String> {
    s.parse().map_err(|e: linattn::Error| e.to_string())
}

fn positive(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_precision(s: &str) -> Result<Precision, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Verify(args) => commands::verify(args),
        Command::Compare(args) => commands::compare(args),
        Command::Bench(args) => commands::bench(args),
        Command::Apply(args) => commands::apply(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eqd_core::config::{Calibration, EigenCount, SampleSplitting};
use eqd_core::nuisance::{Example, NwBandwidth, RegressionKind};

mod commands;

/// Tests whether two estimable functions of the data-generating law are
/// equal in distribution.
#[derive(Debug, Parser)]
#[command(name = "mmd-eqd", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the test on a CSV dataset and write a JSON report.
    Test(TestArgs),
    /// Run a Monte Carlo experiment and write rejection tables.
    Simulate(SimulateArgs),
    /// Check the analytic identities on exact discrete laws.
    OracleCheck(OracleArgs),
}

/// Overrides shared by `test` and `simulate`; they take precedence over the
/// config file and `MMD_EQD_SEED`.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// TOML or JSON file with TestConfig fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_parser = parse_method)]
    method: Option<Calibration>,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of Gram eigenvalues: `all`, `auto` or a count.
    #[arg(long, value_parser = parse_eigen_count)]
    eigen_count: Option<EigenCount>,
    #[arg(long)]
    mc_draws: Option<usize>,
    /// Outcome regression: `nw` (4 × Scott's rule), `nw:scott`,
    /// `nw:<bandwidth>`, `ols` or `knn:<k>`.
    #[arg(long, value_parser = parse_model)]
    outcome_model: Option<RegressionKind>,
}

#[derive(Debug, Args)]
struct TestArgs {
    #[arg(long)]
    data: PathBuf,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "ex1", value_parser = parse_example_name)]
    example: String,
    /// Coordinate left out by ex4 (0-based).
    #[arg(long, default_value_t = 0)]
    ex4_k: usize,
    /// Artificial treatment probability for ex4.
    #[arg(long, default_value_t = 0.5)]
    ex4_p: f64,
    /// Fit nuisances on one half and test on the other.
    #[arg(long)]
    split: bool,
    /// Estimate the propensity by logistic regression instead of using 1/2.
    #[arg(long, conflicts_with = "propensity")]
    logistic_propensity: bool,
    /// Known constant propensity P(A = 1 | W).
    #[arg(long)]
    propensity: Option<f64>,
    /// Covariate columns (comma separated); default: every column not used
    /// as treatment or outcome.
    #[arg(long, value_delimiter = ',')]
    w: Vec<String>,
    /// Treatment column; default `a` when present.
    #[arg(long)]
    a: Option<String>,
    /// Outcome columns; default: columns whose name starts with `y`.
    #[arg(long, value_delimiter = ',')]
    y: Vec<String>,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// 1a, 1b, 1c, 2 or 3.
    #[arg(long)]
    scenario: String,
    /// Sample sizes, comma separated; one table row each.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long)]
    reps: usize,
    /// Effect size for scenario 2.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f64,
    /// Signal coordinates for scenario 3.
    #[arg(long, default_value_t = 0)]
    signal_coords: usize,
    #[arg(long, default_value = "ex1", value_parser = parse_example_name)]
    example: String,
    #[arg(long)]
    split: bool,
    /// Output directory for rejection.{csv,json,tsv}; CSV to stdout when
    /// absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-replication records as trace.jsonl.
    #[arg(long, requires = "out")]
    trace: bool,
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Replace the constant 4 in the kernel bracket (mutation testing).
    #[arg(long, hide = true)]
    kernel_constant: Option<f64>,
}

fn parse_method(s: &str) -> Result<Calibration, String> {
    s.parse().map_err(|e: eqd_core::error::Error| e.to_string())
}

fn parse_eigen_count(s: &str) -> Result<EigenCount, String> {
    match s {
        "all" => Ok(EigenCount::All),
        "auto" => Ok(EigenCount::Auto),
        _ => match s.parse::<usize>() {
            Ok(0) | Err(_) => Err(format!("expected `all`, `auto` or a positive count, got `{s}`")),
            Ok(k) => Ok(EigenCount::Top(k)),
        },
    }
}

fn parse_model(s: &str) -> Result<RegressionKind, String> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    match (name, arg) {
        ("ols", None) => Ok(RegressionKind::LinearOls),
        ("nw", None) => Ok(RegressionKind::default()),
        ("nw", Some("scott")) => Ok(RegressionKind::NadarayaWatson {
            bandwidth: NwBandwidth::Scott,
        }),
        ("nw", Some(h)) => h
            .parse()
            .map(|h| RegressionKind::NadarayaWatson {
                bandwidth: NwBandwidth::Fixed(h),
            })
            .map_err(|_| format!("bad bandwidth `{h}`")),
        ("knn", Some(k)) => k
            .parse()
            .map(|k| RegressionKind::KNearest { k })
            .map_err(|_| format!("bad k `{k}`")),
        _ => Err(format!("unknown outcome model `{s}`")),
    }
}

fn parse_example_name(s: &str) -> Result<String, String> {
    match s {
        "ex1" | "ex2" | "ex3" | "ex4" => Ok(s.to_string()),
        _ => Err(format!("unknown example `{s}` (expected ex1, ex2, ex3 or ex4)")),
    }
}

fn example_from(name: &str, k: usize, p: f64) -> Example {
    match name {
        "ex1" => Example::Ex1,
        "ex2" => Example::Ex2,
        "ex3" => Example::Ex3,
        _ => Example::Ex4 { k, p },
    }
}

impl ConfigArgs {
    fn split(&self, split: bool) -> Option<SampleSplitting> {
        split.then_some(SampleSplitting::TwoFold)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(commands::EXIT_USAGE);
        }
    }
    let outcome = match cli.command {
        Command::Test(args) => commands::test(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::OracleCheck(args) => commands::oracle_check(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

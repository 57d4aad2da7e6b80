use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use eqd_core::config::TestConfig;
use eqd_core::data::{validate_dataset, RawTable, Schema};
use eqd_core::error::Error;
use eqd_core::kernel::gamma_tu_unchecked;
use eqd_core::nuisance::{ExampleSpec, PropensityModel};
use eqd_core::oracle::{gamma_tu_variant, run_identity_suite};
use eqd_core::pipeline::test_dataset;
use eqd_core::simulation::{run_experiment, RejectionTable, Scenario, ScenarioSpec, Variant};
use serde::Serialize;

use crate::{example_from, ConfigArgs, OracleArgs, SimulateArgs, TestArgs};

pub const EXIT_ORACLE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub struct CliError(Error);

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        if self.0.is_numeric() {
            EXIT_NUMERIC
        } else {
            EXIT_USAGE
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError(e)
    }
}

type CliResult = Result<u8, CliError>;

/// Defaults, then the config file, then `MMD_EQD_SEED`, then flags.
fn effective_config(args: &ConfigArgs) -> Result<TestConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => TestConfig::from_path(path)?,
        None => TestConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(m) = args.method {
        cfg.calibration = m;
    }
    if let Some(b) = args.bandwidth {
        cfg.bandwidth = b;
    }
    if let Some(s) = args.seed {
        cfg.seed.seed = s;
    }
    if let Some(e) = args.eigen_count {
        cfg.eigen_count = e;
    }
    if let Some(d) = args.mc_draws {
        cfg.mc_draws = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn infer_schema(header: &[String], args: &TestArgs) -> Schema {
    let a = args
        .a
        .clone()
        .or_else(|| header.iter().find(|h| h.as_str() == "a").cloned());
    let y = if args.y.is_empty() {
        header.iter().filter(|h| h.starts_with('y')).cloned().collect()
    } else {
        args.y.clone()
    };
    let w = if args.w.is_empty() {
        header
            .iter()
            .filter(|h| Some(*h) != a.as_ref() && !y.contains(h))
            .cloned()
            .collect()
    } else {
        args.w.clone()
    };
    Schema { w, a, y }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut f = BufWriter::new(File::create(path).map_err(Error::from)?);
            serde_json::to_writer_pretty(&mut f, value).map_err(Error::from)?;
            writeln!(f).map_err(Error::from)?;
            f.flush().map_err(Error::from)?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            serde_json::to_writer_pretty(&mut lock, value).map_err(Error::from)?;
            writeln!(lock).map_err(Error::from)?;
        }
    }
    Ok(())
}

pub fn test(args: TestArgs) -> CliResult {
    let mut cfg = effective_config(&args.cfg)?;
    if let Some(s) = args.cfg.split(args.split) {
        cfg.sample_splitting = s;
    }
    let raw = RawTable::from_reader(File::open(&args.data).map_err(Error::from)?)?;
    let schema = infer_schema(&raw.header, &args);
    let data = validate_dataset(&raw, &schema)?;
    let mut spec = ExampleSpec::new(example_from(&args.example, args.ex4_k, args.ex4_p));
    if let Some(m) = args.cfg.outcome_model {
        spec.outcome_model = m;
    }
    if args.logistic_propensity {
        spec.propensity_model = PropensityModel::logistic();
    } else if let Some(p) = args.propensity {
        spec.propensity_model = PropensityModel::known(p);
    }
    spec.clip_b = cfg.bandwidth;
    let report = test_dataset(&data, &spec, &cfg)?;
    write_json(&report, args.out.as_deref())?;
    if args.out.is_some() {
        println!("{}", report.summary_line());
    } else {
        eprintln!("{}", report.summary_line());
    }
    Ok(0)
}

fn parse_scenario(args: &SimulateArgs) -> Result<Scenario, CliError> {
    Ok(match args.scenario.as_str() {
        "1a" => Scenario::S1 { variant: Variant::A },
        "1b" => Scenario::S1 { variant: Variant::B },
        "1c" => Scenario::S1 { variant: Variant::C },
        "2" => Scenario::S2 { beta: args.beta },
        "3" => Scenario::S3 {
            signal_coords: args.signal_coords,
        },
        other => {
            return Err(Error::InvalidConfig(format!(
                "unknown scenario `{other}` (expected 1a, 1b, 1c, 2 or 3)"
            ))
            .into())
        }
    })
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    config: &'a TestConfig,
    specs: &'a [ScenarioSpec],
    table: &'a RejectionTable,
}

pub fn simulate(args: SimulateArgs) -> CliResult {
    let mut cfg = effective_config(&args.cfg)?;
    if let Some(s) = args.cfg.split(args.split) {
        cfg.sample_splitting = s;
    }
    let scenario = parse_scenario(&args)?;
    let example = example_from(&args.example, 0, 0.5);
    let specs: Vec<ScenarioSpec> = args
        .n
        .iter()
        .map(|&n| {
            let mut s = ScenarioSpec::new(scenario, n, example, args.reps, cfg.seed);
            if let Some(b) = args.cfg.bandwidth {
                s.bandwidth = b;
            }
            if let Some(m) = args.cfg.outcome_model {
                s.outcome_model = m;
            }
            s
        })
        .collect();
    for s in &specs {
        s.validate()?;
    }
    for w in specs[0].warnings() {
        eprintln!("warning: {w}");
    }
    let mut table = RejectionTable::default();
    let mut traces = Vec::new();
    for spec in &specs {
        eprintln!("scenario {} n = {}: {} replications", spec.scenario, spec.n, spec.replications);
        let e = run_experiment(spec, &cfg)?;
        if e.row.failures > 0 {
            eprintln!("warning: {} replications failed and were excluded", e.row.failures);
        }
        eprintln!("  rate = {:.4} (mc se {:.4})", e.row.rate, e.row.mc_se);
        table.rows.push(e.row.clone());
        traces.push(e);
    }
    match &args.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(Error::from)?;
            table.write_csv(File::create(dir.join("rejection.csv")).map_err(Error::from)?)?;
            table.write_tsv(File::create(dir.join("rejection.tsv")).map_err(Error::from)?)?;
            write_json(
                &SimulationReport {
                    config: &cfg,
                    specs: &specs,
                    table: &table,
                },
                Some(&dir.join("rejection.json")),
            )?;
            if args.trace {
                let mut f = BufWriter::new(File::create(dir.join("trace.jsonl")).map_err(Error::from)?);
                for e in &traces {
                    e.write_trace(&mut f)?;
                }
                f.flush().map_err(Error::from)?;
            }
        }
        None => table.write_csv(io::stdout().lock())?,
    }
    Ok(0)
}

pub fn oracle_check(args: OracleArgs) -> CliResult {
    let checks = match args.kernel_constant {
        Some(c) => run_identity_suite(&gamma_tu_variant(c)),
        None => run_identity_suite(&gamma_tu_unchecked),
    };
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    println!("{} checks, {} failed", checks.len(), failed);
    Ok(if failed == 0 { 0 } else { EXIT_ORACLE })
}

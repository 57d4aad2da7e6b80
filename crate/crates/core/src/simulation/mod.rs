//! Monte Carlo experiments and rejection-rate tables.

pub mod known;
pub mod scenarios;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Calibration, TestConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::inference::{run_test, TestResult};
use crate::nuisance::{Example, ExampleSpec, PropensityModel, RegressionKind};
use crate::pipeline::test_dataset;
use crate::rng::{streams, RngSeed};

pub use known::KnownDgp;
pub use scenarios::{draw_scenario1, draw_scenario2, draw_scenario3, Variant, SCENARIO3_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Scenario {
    S1 { variant: Variant },
    S2 { beta: f64 },
    S3 { signal_coords: usize },
}

impl Scenario {
    /// Kernel bandwidth used unless overridden: 1/5 for scenario 2, else 1.
    pub fn default_bandwidth(&self) -> f64 {
        match self {
            Scenario::S2 { .. } => 0.2,
            _ => 1.0,
        }
    }

    pub fn draw(&self, n: usize, seed: RngSeed) -> Result<Dataset> {
        match *self {
            Scenario::S1 { variant } => draw_scenario1(variant, n, seed),
            Scenario::S2 { beta } => draw_scenario2(beta, n, seed),
            Scenario::S3 { signal_coords } => draw_scenario3(signal_coords, n, seed),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scenario::S1 { variant } => write!(f, "1{variant}"),
            Scenario::S2 { beta } => write!(f, "2(beta={beta})"),
            Scenario::S3 { signal_coords } => write!(f, "3(signal={signal_coords})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    /// Ex1 (blip ≡ 0) or Ex2 (equal in distribution).
    pub example: Example,
    pub bandwidth: f64,
    pub replications: usize,
    pub seed: RngSeed,
    pub outcome_model: RegressionKind,
    pub propensity_model: PropensityModel,
}

impl ScenarioSpec {
    /// Defaults: per-scenario bandwidth, Nadaraya-Watson outcome regression,
    /// propensity known to be 1/2 (estimated by logistic regression in
    /// scenario 2).
    pub fn new(scenario: Scenario, n: usize, example: Example, replications: usize, seed: RngSeed) -> Self {
        ScenarioSpec {
            scenario,
            n,
            example,
            bandwidth: scenario.default_bandwidth(),
            replications,
            seed,
            outcome_model: RegressionKind::default(),
            propensity_model: match scenario {
                Scenario::S2 { .. } => PropensityModel::logistic(),
                _ => PropensityModel::known(0.5),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if self.n < 2 {
            return Err(Error::TooFewObservations { needed: 2, have: self.n });
        }
        if !matches!(self.example, Example::Ex1 | Example::Ex2) {
            return Err(Error::InvalidConfig(format!(
                "simulations run ex1 or ex2, not {}",
                self.example
            )));
        }
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if let Scenario::S3 { signal_coords } = self.scenario {
            if signal_coords > SCENARIO3_DIM {
                return Err(Error::InvalidConfig(format!(
                    "signal_coords must lie in 0..={SCENARIO3_DIM}, got {signal_coords}"
                )));
            }
        }
        Ok(())
    }

    /// Non-fatal remarks about these settings.
    pub fn warnings(&self) -> Vec<String> {
        match self.scenario {
            Scenario::S2 { beta } if !(-0.5..=0.5).contains(&beta) => {
                vec![format!("beta = {beta} lies outside the studied range [-0.5, 0.5]")]
            }
            _ => Vec::new(),
        }
    }

    /// Outcome and propensity models, with R and S clipped to
    /// [−bandwidth, bandwidth] so they land in [−1, 1] after rescaling.
    pub fn example_spec(&self) -> ExampleSpec {
        ExampleSpec {
            example: self.example,
            outcome_model: self.outcome_model,
            propensity_model: self.propensity_model,
            clip_b: self.bandwidth,
        }
    }
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_psi_n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub reject: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReplicationRecord {
    fn from_result(replication: usize, r: Result<TestResult>) -> Self {
        match r {
            Ok(t) => ReplicationRecord {
                replication,
                psi_n: Some(t.psi_n),
                n_psi_n: Some(t.n_psi_n),
                cutoff: Some(t.cutoff),
                p_value: t.p_value,
                reject: t.reject,
                error: None,
            },
            Err(e) => ReplicationRecord {
                replication,
                psi_n: None,
                n_psi_n: None,
                cutoff: None,
                p_value: None,
                reject: false,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRow {
    pub scenario: String,
    pub n: usize,
    pub method: Calibration,
    pub alpha: f64,
    pub rate: f64,
    pub mc_se: f64,
    /// Replications that completed.
    pub reps: usize,
    /// Replications that errored and were left out of the rate.
    #[serde(default)]
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub row: RejectionRow,
    pub trace: Vec<ReplicationRecord>,
}

impl Experiment {
    /// ψ_n of every completed replication, in replication order.
    pub fn psi_values(&self) -> Vec<f64> {
        self.trace.iter().filter_map(|r| r.psi_n).collect()
    }

    /// One JSON object per line.
    pub fn write_trace<W: Write>(&self, mut out: W) -> Result<()> {
        for rec in &self.trace {
            serde_json::to_writer(&mut out, rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Runs `reps` independent replications. Replication r uses
/// `seed.child(r)`, so results do not depend on scheduling.
pub fn replicate<F>(label: String, n: usize, config: &TestConfig, reps: usize, seed: RngSeed, f: F) -> Result<Experiment>
where
    F: Fn(RngSeed) -> Result<TestResult> + Sync,
{
    if reps == 0 {
        return Err(Error::InvalidConfig("replications must be at least 1".into()));
    }
    let trace: Vec<ReplicationRecord> = (0..reps)
        .into_par_iter()
        .map(|r| ReplicationRecord::from_result(r, f(seed.child(r as u64))))
        .collect();
    let ok = trace.iter().filter(|t| t.error.is_none()).count();
    if ok == 0 {
        return Err(Error::InvalidConfig(format!(
            "all {reps} replications failed; first error: {}",
            trace[0].error.as_deref().unwrap_or("")
        )));
    }
    let rejections = trace.iter().filter(|t| t.reject).count();
    let rate = rejections as f64 / ok as f64;
    Ok(Experiment {
        row: RejectionRow {
            scenario: label,
            n,
            method: config.calibration,
            alpha: config.alpha,
            rate,
            mc_se: (rate * (1.0 - rate) / ok as f64).sqrt(),
            reps: ok,
            failures: reps - ok,
        },
        trace,
    })
}

/// Draws data, fits nuisances and tests, once per replication. The scenario
/// bandwidth replaces the one in `test_config`.
pub fn run_experiment(spec: &ScenarioSpec, test_config: &TestConfig) -> Result<Experiment> {
    spec.validate()?;
    let example = spec.example_spec();
    let base = TestConfig {
        bandwidth: spec.bandwidth,
        ..test_config.clone()
    };
    base.validate()?;
    replicate(spec.scenario.to_string(), spec.n, &base, spec.replications, spec.seed, |rep| {
        let data = spec.scenario.draw(spec.n, rep.with_stream(streams::DATA))?;
        let cfg = TestConfig {
            seed: rep,
            ..base.clone()
        };
        Ok(test_dataset(&data, &example, &cfg)?.result)
    })
}

/// Replications on a DGP with known nuisances.
pub fn run_known(dgp: KnownDgp, n: usize, reps: usize, config: &TestConfig, seed: RngSeed) -> Result<Experiment> {
    config.validate()?;
    replicate(dgp.to_string(), n, config, reps, seed, |rep| {
        let fe = dgp.evaluations(n, rep.with_stream(streams::DATA))?;
        run_test(
            &fe,
            &TestConfig {
                seed: rep,
                ..config.clone()
            },
        )
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionTable {
    pub rows: Vec<RejectionRow>,
}

impl RejectionTable {
    pub const CSV_HEADER: [&'static str; 7] = ["scenario", "n", "method", "alpha", "rate", "mc_se", "reps"];

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.scenario.clone(),
                r.n.to_string(),
                r.method.to_string(),
                r.alpha.to_string(),
                r.rate.to_string(),
                r.mc_se.to_string(),
                r.reps.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    /// Whitespace-separated columns for gnuplot.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# scenario\tn\tmethod\talpha\trate\tmc_se\treps")?;
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                r.scenario, r.n, r.method, r.alpha, r.rate, r.mc_se, r.reps
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_config(method: Calibration) -> TestConfig {
        TestConfig {
            calibration: method,
            mc_draws: 2000,
            ..TestConfig::default()
        }
    }

    fn small_spec(reps: usize) -> ScenarioSpec {
        ScenarioSpec {
            outcome_model: RegressionKind::LinearOls,
            ..ScenarioSpec::new(Scenario::S1 { variant: Variant::A }, 60, Example::Ex1, reps, RngSeed::new(11))
        }
    }

    #[test]
    fn single_replication_rate_is_binary() {
        let e = run_experiment(&small_spec(1), &quick_config(Calibration::DegenerateS)).unwrap();
        assert!(e.row.rate == 0.0 || e.row.rate == 1.0);
        assert_eq!(e.row.mc_se, 0.0);
        assert_eq!(e.trace.len(), 1);
    }

    #[test]
    fn experiments_are_deterministic() {
        let cfg = quick_config(Calibration::GramEigen);
        let a = run_experiment(&small_spec(6), &cfg).unwrap();
        let b = run_experiment(&small_spec(6), &cfg).unwrap();
        assert_eq!(a, b);
        let mut ca = Vec::new();
        let mut cb = Vec::new();
        RejectionTable { rows: vec![a.row] }.write_csv(&mut ca).unwrap();
        RejectionTable { rows: vec![b.row] }.write_csv(&mut cb).unwrap();
        assert_eq!(ca, cb);
    }

    #[test]
    fn zero_replications_rejected() {
        assert!(run_experiment(&small_spec(0), &quick_config(Calibration::DegenerateS)).is_err());
    }

    #[test]
    fn mc_se_formula() {
        let cfg = quick_config(Calibration::Chebyshev);
        let e = run_known(KnownDgp::Alternative, 200, 10, &cfg, RngSeed::new(5)).unwrap();
        let r = e.row.rate;
        assert!((e.row.mc_se - (r * (1.0 - r) / 10.0).sqrt()).abs() < 1e-15);
        assert!((0.0..=1.0).contains(&r));
    }

    #[test]
    fn failed_replications_are_counted() {
        // Ex2 under degenerate-S calibration fails every replication.
        let spec = ScenarioSpec {
            example: Example::Ex2,
            ..small_spec(3)
        };
        assert!(run_experiment(&spec, &quick_config(Calibration::DegenerateS)).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let table = RejectionTable {
            rows: vec![RejectionRow {
                scenario: "1a".into(),
                n: 125,
                method: Calibration::GramEigen,
                alpha: 0.05,
                rate: 0.1,
                mc_se: 0.03,
                reps: 100,
                failures: 0,
            }],
        };
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "scenario,n,method,alpha,rate,mc_se,reps\n1a,125,gram-eigen,0.05,0.1,0.03,100\n");
    }

    #[test]
    fn scenario_labels_and_warnings() {
        assert_eq!(Scenario::S1 { variant: Variant::C }.to_string(), "1c");
        assert_eq!(Scenario::S2 { beta: 0.5 }.to_string(), "2(beta=0.5)");
        let s = ScenarioSpec::new(Scenario::S2 { beta: 0.9 }, 100, Example::Ex1, 1, RngSeed::new(1));
        assert_eq!(s.bandwidth, 0.2);
        assert_eq!(s.warnings().len(), 1);
        assert!(s.validate().is_ok());
        let bad = ScenarioSpec::new(Scenario::S3 { signal_coords: 21 }, 100, Example::Ex1, 1, RngSeed::new(1));
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scenario3_runs_multivariate() {
        let spec = ScenarioSpec {
            outcome_model: RegressionKind::LinearOls,
            ..ScenarioSpec::new(Scenario::S3 { signal_coords: 20 }, 80, Example::Ex1, 2, RngSeed::new(3))
        };
        let e = run_experiment(&spec, &quick_config(Calibration::GramEigen)).unwrap();
        assert_eq!(e.row.reps, 2);
    }

    #[test]
    fn trace_is_json_lines() {
        let e = run_experiment(&small_spec(3), &quick_config(Calibration::DegenerateS)).unwrap();
        let mut buf = Vec::new();
        e.write_trace(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        for line in text.lines() {
            let rec: ReplicationRecord = serde_json::from_str(line).unwrap();
            assert!(rec.error.is_none());
        }
    }
}

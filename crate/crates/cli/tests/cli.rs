use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use eqd_core::data::{Dataset, Observation, Schema};
use eqd_core::rng::RngSeed;
use eqd_core::simulation::{draw_scenario1, Variant};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_mmd-eqd"));
    c.env_remove("MMD_EQD_SEED");
    c
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn write_scenario_csv(dir: &Path, n: usize) -> PathBuf {
    let data = draw_scenario1(Variant::A, n, RngSeed::new(4)).unwrap();
    let path = dir.join("data.csv");
    data.write_csv(fs::File::create(&path).unwrap()).unwrap();
    path
}

fn write_untreated_csv(dir: &Path) -> PathBuf {
    let obs: Vec<Observation> = (0..30)
        .map(|i| Observation::new(vec![i as f64 / 30.0], None, vec![(i % 7) as f64 / 7.0 - 0.4]))
        .collect();
    let data = Dataset::from_observations(&obs, Schema::generated(1, false, 1)).unwrap();
    let path = dir.join("untreated.csv");
    data.write_csv(fs::File::create(&path).unwrap()).unwrap();
    path
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn oracle_check_passes() {
    let out = run(bin().arg("oracle-check"));
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 6);
    assert!(!text.contains("FAIL"));
}

#[test]
fn oracle_check_catches_mutated_kernel() {
    let out = run(bin().args(["oracle-check", "--kernel-constant", "3"]));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn test_ex3_defaults_to_gram_eigen() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_scenario_csv(dir.path(), 80);
    let report = dir.path().join("report.json");
    let out = run(bin().args(["test", "--example", "ex3", "--mc-draws", "2000", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&report));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("reject H0: "));
    assert!(stdout.contains("n psi_n = "));
    let v = json(&report);
    assert_eq!(v["result"]["method"], "gram-eigen");
    assert_eq!(v["config"]["mc_draws"], 2000);
    assert_eq!(v["result"]["n"], 80);
    assert!(v["nuisance"]["outcome"].is_array());
}

#[test]
fn missing_treatment_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_untreated_csv(dir.path());
    let out = run(bin().args(["test", "--example", "ex1", "--data"]).arg(&data));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("treatment column"));
}

#[test]
fn degenerate_s_rejects_ex2() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_scenario_csv(dir.path(), 40);
    let out = run(bin()
        .args(["test", "--example", "ex2", "--method", "degenerate-s", "--data"])
        .arg(&data));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("degenerate-S"));
}

#[test]
fn flags_override_config_file_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_scenario_csv(dir.path(), 50);
    let cfg = dir.path().join("cfg.toml");
    fs::write(&cfg, "alpha = 0.1\nmc_draws = 1000\ncalibration = \"degenerate-s\"\n").unwrap();
    let report = dir.path().join("r.json");
    let base = || {
        let mut c = bin();
        c.args(["test", "--data"])
            .arg(&data)
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&report);
        c
    };
    assert_eq!(run(base().env("MMD_EQD_SEED", "77")).status.code(), Some(0));
    let v = json(&report);
    assert_eq!(v["config"]["alpha"], 0.1);
    assert_eq!(v["config"]["calibration"], "degenerate-s");
    assert_eq!(v["config"]["seed"]["seed"], 77);
    assert_eq!(
        run(base().env("MMD_EQD_SEED", "77").args(["--seed", "5", "--alpha", "0.2"]))
            .status
            .code(),
        Some(0)
    );
    let v = json(&report);
    assert_eq!(v["config"]["seed"]["seed"], 5);
    assert_eq!(v["config"]["alpha"], 0.2);
}

#[test]
fn bad_method_is_a_usage_error() {
    let out = run(bin().args(["test", "--data", "x.csv", "--method", "bootstrap"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_one_row_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let mut tables = Vec::new();
    for run_dir in ["one", "two"] {
        let out_dir = dir.path().join(run_dir);
        let out = run(bin()
            .args([
                "simulate",
                "--scenario",
                "1a",
                "--n",
                "125",
                "--reps",
                "10",
                "--method",
                "degenerate-s",
                "--seed",
                "3",
                "--trace",
                "--out",
            ])
            .arg(&out_dir));
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = fs::read(out_dir.join("rejection.csv")).unwrap();
        let text = String::from_utf8(csv.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), "scenario,n,method,alpha,rate,mc_se,reps");
        assert!(text.lines().nth(1).unwrap().starts_with("1a,125,degenerate-s,0.05,"));
        let trace = fs::read_to_string(out_dir.join("trace.jsonl")).unwrap();
        assert_eq!(trace.lines().count(), 10);
        let report = json(&out_dir.join("rejection.json"));
        assert_eq!(report["config"]["seed"]["seed"], 3);
        tables.push(csv);
    }
    assert_eq!(tables[0], tables[1]);
    let mut names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names, ["one", "two"]);
}

#[test]
fn simulate_zero_reps_is_a_usage_error() {
    let out = run(bin().args(["simulate", "--scenario", "1a", "--n", "125", "--reps", "0"]));
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_unknown_scenario_is_a_usage_error() {
    let out = run(bin().args(["simulate", "--scenario", "4", "--n", "125", "--reps", "1"]));
    assert_eq!(out.status.code(), Some(2));
}

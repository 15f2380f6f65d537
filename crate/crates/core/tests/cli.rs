use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_skewshadow"));
    c.env_remove("SKEWSHADOW_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn exponent_reports_c0() {
    let out = run(&["exponent", "--lambda0", "0.5", "--lambda1", "3"]);
    assert!(out.status.success());
    let v = json(&out);
    assert!((v["c0"].as_f64().unwrap() - 1.9109).abs() < 1e-3);
    assert_eq!(v["inverted"], Value::Bool(false));
    for key in ["lambda0", "lambda1", "b", "residual"] {
        assert!(v[key].is_number(), "missing {key}");
    }
}

#[test]
fn exponent_normalizes_inverse_parameters() {
    let a = json(&run(&["exponent", "--lambda0", "0.5", "--lambda1", "3"]));
    let b = json(&run(&["exponent", "--lambda0", "0.3333333333", "--lambda1", "2"]));
    assert_eq!(b["inverted"], Value::Bool(true));
    assert!((a["b"].as_f64().unwrap() - b["b"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn degenerate_parameters_exit_2() {
    let out = run(&["exponent", "--lambda0", "0.5", "--lambda1", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lambda0*lambda1 != 1"));
    let out = run(&["exponent", "--lambda0", "1.5", "--lambda1", "2"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["exponent", "--lambda0", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn radius_of_worked_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "one.txt",
        "skewshadow-instance v1 lambda0=0.25 lambda1=2 d=1\n1 1\n",
    );
    let out = run(&["radius", "--instance", &path]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!((v["radius"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert!((v["oracle_radius"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["agreement"], Value::Bool(true));
    assert_eq!(v["witness_k"], 0);
    assert_eq!(v["witness_n"], 1);
}

#[test]
fn radius_of_noiseless_instance_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "zero.txt",
        "skewshadow-instance v1 lambda0=0.5 lambda1=3 d=0.5\n1 0\n0 0\n1 0\n",
    );
    let v = json(&run(&["radius", "--instance", &path]));
    assert_eq!(v["radius"].as_f64(), Some(0.0));
    assert_eq!(v["oracle_radius"].as_f64(), Some(0.0));
}

#[test]
fn malformed_instance_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "bad.txt",
        "skewshadow-instance v1 lambda0=0.5 lambda1=3 d=1\n1 0.5\n0 0.25\n1 seven\n",
    );
    let out = run(&["radius", "--instance", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));
}

#[test]
fn simulate_then_radius_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.txt");
    let inst = inst.to_str().unwrap();
    let sim = run(&[
        "simulate", "--lambda0", "0.5", "--lambda1", "3", "--n", "300", "--d", "0.001", "--seed", "17",
        "--emit-instance", inst,
    ]);
    assert!(sim.status.success());
    let rad = run(&["radius", "--instance", inst]);
    assert!(rad.status.success());
    let (a, b) = (json(&sim), json(&rad));
    assert_eq!(a["K"], b["K"]);
    assert_eq!(a["radius"], b["radius"]);
    assert_eq!(b["agreement"], Value::Bool(true));
}

#[test]
fn oracle_disagreement_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst.txt");
    let inst = inst.to_str().unwrap();
    let sim = run(&["simulate", "--lambda0", "0.5", "--lambda1", "3", "--n", "50", "--seed", "5", "--emit-instance", inst]);
    assert!(sim.status.success());
    // the oracle is only accurate to ~1e-12 relative
    let out = run(&["radius", "--instance", inst, "--tol", "1e-300"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["agreement"], Value::Bool(false));
}

#[test]
fn seed_defaults_to_environment() {
    let args = ["simulate", "--lambda0", "0.5", "--lambda1", "3", "--n", "40"];
    let with_env = bin().args(args).env("SKEWSHADOW_SEED", "99").output().unwrap();
    let explicit = run(&[&args[..], &["--seed", "99"]].concat());
    assert_eq!(with_env.stdout, explicit.stdout);
    assert_eq!(json(&with_env)["seed"], 99);
    let bad = bin().args(args).env("SKEWSHADOW_SEED", "nope").output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

fn sweep_csv(dir: &Path, threads: &str) -> Vec<u8> {
    let out_path = dir.join(format!("sweep-{threads}.csv"));
    let out = run(&[
        "sweep", "--lambda0", "0.5", "--lambda1", "3", "--epsilon", "1", "--c-values", "1,3", "--n-values", "50,200",
        "--samples", "300", "--seed", "4", "--threads", threads, "--output-path", out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    fs::read(out_path).unwrap()
}

#[test]
fn sweep_is_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let one = sweep_csv(dir.path(), "1");
    let eight = sweep_csv(dir.path(), "8");
    let all = sweep_csv(dir.path(), "0");
    assert_eq!(one, eight);
    assert_eq!(one, all);
    let text = String::from_utf8(one).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,c,L,samples,successes,p_hat,ci_low,ci_high,seed"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let order: Vec<(&str, f64)> = rows.iter().map(|r| (r[0], r[1].parse().unwrap())).collect();
    assert_eq!(order, vec![("50", 1.0), ("50", 3.0), ("200", 1.0), ("200", 3.0)]);
    for r in &rows {
        let n: f64 = r[0].parse().unwrap();
        let c: f64 = r[1].parse().unwrap();
        let l: f64 = r[2].parse().unwrap();
        assert_eq!(l, (c * n.ln()).exp());
        let p: f64 = r[5].parse().unwrap();
        let s: f64 = r[4].parse().unwrap();
        assert_eq!(p, s / 300.0);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"command": "sweep", "lambda0": 0.5, "lambda1": 3, "c_values": [1.0], "n_values": [30], "samples": 50, "seed": 1}"#,
    );
    let from_file = run(&["sweep", "--config", &cfg]);
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    let overridden = run(&["sweep", "--config", &cfg, "--seed", "2"]);
    let direct = run(&[
        "sweep", "--lambda0", "0.5", "--lambda1", "3", "--c-values", "1", "--n-values", "30", "--samples", "50",
        "--seed", "2",
    ]);
    assert_eq!(overridden.stdout, direct.stdout);
    assert_ne!(from_file.stdout, overridden.stdout);

    let wrong = write(dir.path(), "wrong.json", r#"{"lambda0": 0.5, "lambda1": 3, "bogus": 1}"#);
    assert_eq!(run(&["sweep", "--config", &wrong]).status.code(), Some(2));
    let other = write(dir.path(), "other.json", r#"{"command": "rate"}"#);
    assert_eq!(run(&["sweep", "--config", &other]).status.code(), Some(2));
}

#[test]
fn ruin_small_level_and_csv_shape() {
    let out = run(&["ruin", "--lambda0", "0.5", "--lambda1", "3", "--levels", "0.5,2", "--samples", "20000", "--seed", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("C,horizon,samples,p_hat,ci_low,ci_high,minus_log_p_over_C,b_reference")
    );
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    // C = 0.5 < |ln 0.5| is crossed by a first contracting step
    assert!(first[3] >= 0.5);
    let second: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!(second[3] < first[3]);
}

#[test]
fn rate_table_and_admissibility() {
    let out = run(&["rate", "--lambda0", "0.5", "--lambda1", "3", "--eps-values", "1e-9,0.1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert!(rows[0][1] < 1e-15);
    assert!(rows[1][1] > rows[0][1]);
    let out = run(&["rate", "--lambda0", "0.5", "--lambda1", "3", "--eps-values", "5"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["rate", "--lambda0", "0.5", "--lambda1", "3", "--eps-values", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_tables_parse() {
    let out = run(&["rate", "--lambda0", "0.5", "--lambda1", "3", "--points", "5", "--format", "json"]);
    let v = json(&out);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    assert!((rows[4]["h"].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-6);
}

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn halfeig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfeig"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn unit_interval(n: usize, f: &str, options: &str) -> String {
    format!(
        r#"{{
            "domain": {{"kind": "interval", "a": 0, "b": 1}},
            "n": {n},
            "operator": {{"builtin": "example_4_3"}},
            "f": "{f}",
            "options": {options}
        }}"#
    )
}

fn run(command: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    halfeig(&args)
}

fn result(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap()
}

fn value(v: &Value, key: &str) -> f64 {
    let entry = &v[key];
    assert!(entry["tol"].is_number(), "{key} carries no tolerance: {entry}");
    entry["value"].as_f64().unwrap()
}

#[test]
fn eigen_reports_both_half_eigenvalues() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &unit_interval(401, "sin(pi*x)", "{}"));
    let out = dir.path().join("out");
    let o = run("eigen", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = result(&out);
    assert!((value(&r, "lambda_plus") - PI * PI).abs() <= 1e-3);
    assert!((value(&r, "lambda_minus") - 2.0 * PI * PI).abs() <= 2e-3);
    let csv = fs::read_to_string(out.join("phi_plus.csv")).unwrap();
    assert!(csv.starts_with("x,value\n"));
    assert_eq!(csv.lines().count(), 402);
}

#[test]
fn tstar_recovers_threshold() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &unit_interval(401, "0", r#"{"h": "sin(pi*x)+sin(2*pi*x)"}"#),
    );
    let out = dir.path().join("out");
    let o = run("tstar", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = result(&out);
    assert!((value(&r, "t_star") - 1.0).abs() <= 1e-2);
    assert!(out.join("probes.csv").exists());
}

#[test]
fn resonance_exit_codes_follow_classification() {
    let dir = TempDir::new().unwrap();
    let solvable = write_config(dir.path(), "neg.json", &unit_interval(201, "0-sin(pi*x)", "{}"));
    let out = dir.path().join("neg");
    let o = run("resonance", &solvable, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("solution.csv").exists());
    assert_eq!(result(&out)["classification"], "solvable_strict");

    let unsolvable = write_config(dir.path(), "pos.json", &unit_interval(201, "sin(pi*x)", "{}"));
    let out = dir.path().join("pos");
    let o = run("resonance", &unsolvable, &out, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("continuation.csv").exists());
    assert!(!out.join("solution.csv").exists());
    assert_eq!(result(&out)["status"], "unsolvable");
}

#[test]
fn same_seed_gives_identical_json() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "c.json", &unit_interval(101, "sin(pi*x)", r#"{"trials": 50}"#));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(run("measures", &cfg, &a, &["--seed", "5", "--threads", "1"]).status.code(), Some(0));
    assert_eq!(run("measures", &cfg, &b, &["--seed", "5", "--threads", "3"]).status.code(), Some(0));
    assert_eq!(
        fs::read(a.join("result.json")).unwrap(),
        fs::read(b.join("result.json")).unwrap()
    );
}

#[test]
fn printed_config_round_trips() {
    let dir = TempDir::new().unwrap();
    let body = r#"{
        "domain": {"kind": "disk", "radius": 1},
        "n": 21,
        "operator": {"builtin": "example_4_2"},
        "tolerances": {"cert_tol": 0.05},
        "options": {"candidates": [{"rules": [{"region": "x", "member": 2}]}]}
    }"#;
    let cfg = write_config(dir.path(), "c.json", body);
    let first = halfeig(&["eigen", "--config", cfg.to_str().unwrap(), "--print-config"]);
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let echoed = write_config(dir.path(), "echo.json", &String::from_utf8(first.stdout.clone()).unwrap());
    let second = halfeig(&["eigen", "--config", echoed.to_str().unwrap(), "--print-config"]);
    assert_eq!(first.stdout, second.stdout);

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("eigen", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run("eigen", &echoed, &b, &[]).status.code(), Some(0));
    assert_eq!(
        fs::read(a.join("result.json")).unwrap(),
        fs::read(b.join("result.json")).unwrap()
    );
    let csv = fs::read_to_string(a.join("phi_plus.csv")).unwrap();
    assert!(csv.starts_with("x,y,value\n"));
}

#[test]
fn schema_violations_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cases = [
        (unit_interval(41, "sin(pi*x)", r#"{"lambda": "two"}"#), "options.lambda"),
        (unit_interval(41, "sin(pi*", "{}"), "config f:"),
        (
            unit_interval(41, "1", r#"{"candidates": [{"rules": [{"region": "x", "member": 7}]}]}"#),
            "options.candidates[0].rules[0].member",
        ),
        (unit_interval(2, "1", "{}"), "config n:"),
    ];
    for (i, (body, path)) in cases.iter().enumerate() {
        let cfg = write_config(dir.path(), &format!("c{i}.json"), body);
        let o = run("eigen", &cfg, &dir.path().join("out"), &[]);
        assert_eq!(o.status.code(), Some(1));
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(path), "expected `{path}` in: {err}");
    }
}

#[test]
fn solve_and_sweep_write_tables() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        &unit_interval(101, "1", r#"{"lambda": 12, "sweep": {"from": 0, "to": 9.8, "count": 8}}"#),
    );
    let out = dir.path().join("solve");
    let o = run("solve", &cfg, &out, &[]);
    assert_ne!(o.status.code(), Some(0), "no monotone solve above the first half-eigenvalue");
    assert!(!out.join("u.csv").exists());

    let below = write_config(dir.path(), "below.json", &unit_interval(101, "1", r#"{"lambda": 5}"#));
    let out = dir.path().join("below");
    assert_eq!(run("solve", &below, &out, &[]).status.code(), Some(0));
    assert_eq!(result(&out)["status"], "converged");
    assert!(out.join("u.csv").exists());

    let out = dir.path().join("sweep");
    assert_eq!(run("sweep", &cfg, &out, &[]).status.code(), Some(0));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let norms: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(norms.len(), 8);
    assert!(norms.windows(2).all(|w| w[1] > w[0]), "norms grow towards the eigenvalue: {norms:?}");
}

#[test]
fn check_suite_passes_for_pucci() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{
            "domain": {"kind": "interval", "a": 0, "b": 1},
            "n": 101,
            "operator": {"builtin": "pucci_minus(1, 2)"},
            "options": {"trials": 20}
        }"#,
    );
    let out = dir.path().join("out");
    let o = run("check", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(result(&out)["status"], "passed");
}

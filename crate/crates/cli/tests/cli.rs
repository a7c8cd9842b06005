use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const COIN: &str = r#""chain": {"kind": "iid", "states": [0, 1], "probs": [0.5, 0.5], "horizon": 400}"#;

fn scenario(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("scenario.json");
    std::fs::write(&path, format!("{{\"schema_version\": 1, {body}}}")).unwrap();
    path
}

fn mllt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mllt")).args(args).output().unwrap()
}

fn run(cmd: &str, scen: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--scenario", scen.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    mllt(&args)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn validate_iid_coin() {
    let tmp = TempDir::new().unwrap();
    let s = scenario(tmp.path(), &format!(r#"{COIN}, "analysis": {{"validate": {{"phi_n": 3}}}}"#));
    let o = run("validate", &s, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(&tmp.path().join("validate.json"));
    assert_eq!(r["pass"], true);
    assert!(r["delta"].as_f64().unwrap().abs() < 1e-12);
    assert!((r["zeta"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(r["schema_version"], 1);
}

#[test]
fn deterministic_step_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let body = r#""chain": {"kind": "explicit",
        "values": [[0, 1], [0, 1], [0, 1]],
        "initial": [0.5, 0.5],
        "kernels": [[[0.5, 0.5], [0.5, 0.5]], [[1, 0], [0, 1]]]},
        "observable": {"kind": "coordinate"},
        "analysis": {"llt": {"mode": "lattice", "n_grid": [2], "tolerance": 0.1}}"#;
    let s = scenario(tmp.path(), body);
    let o = run("llt", &s, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Assumption 2.2 fails at step"), "{}", stderr(&o));
}

#[test]
fn binomial_lattice_llt() {
    let tmp = TempDir::new().unwrap();
    let body = format!(
        r#"{COIN}, "observable": {{"kind": "coordinate"}},
        "analysis": {{"llt": {{"mode": "lattice", "n_grid": [100, 400], "tolerance": 0.02}}}}"#
    );
    let s = scenario(tmp.path(), &body);
    let o = run("llt", &s, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("llt_error.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,value"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1][0], 400.0);
    assert!(rows[1][1] < 0.02);

    let o = run("llt", &s, tmp.path(), &["--tolerance", "1e-9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corange_report_shape() {
    let tmp = TempDir::new().unwrap();
    let body = format!(
        r#"{COIN}, "observable": {{"kind": "coordinate"}},
        "analysis": {{"corange": {{"t_max": 7.0, "step": 0.01, "n_grid": [100, 200, 300]}}}}"#
    );
    let s = scenario(tmp.path(), &body);
    let o = run("corange", &s, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_json(&tmp.path().join("corange.json"));
    let t0 = r["t0"].as_f64().expect("lattice outcome carries t0");
    assert!((t0 - 2.0 * std::f64::consts::PI).abs() < 1e-6);
    assert!(r["h0"].as_f64().is_some());
    assert!(r["rates"].is_array());
    assert!(tmp.path().join("corange_rates.csv").exists());
}

#[test]
fn thread_count_does_not_change_reports() {
    let tmp = TempDir::new().unwrap();
    let body = format!(
        r#""seed": 11, {COIN}, "observable": {{"kind": "coordinate"}},
        "analysis": {{"simulate": {{"n": 200, "samples": 20000, "kernel_half_width": 1.0, "u_count": 9}}}}"#
    );
    let s = scenario(tmp.path(), &body);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_eq!(run("simulate", &s, &a, &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run("simulate", &s, &b, &["--threads", "8"]).status.code(), Some(0));
    for f in ["simulate.json", "simulate_local_counts.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_override_changes_only_sampled_fields() {
    let tmp = TempDir::new().unwrap();
    let body = format!(
        r#""seed": 11, {COIN}, "observable": {{"kind": "coordinate"}},
        "analysis": {{"simulate": {{"n": 100, "samples": 5000}}}}"#
    );
    let s = scenario(tmp.path(), &body);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run("simulate", &s, &a, &[]);
    run("simulate", &s, &b, &["--seed", "12"]);
    let ra = read_json(&a.join("simulate.json"));
    let rb = read_json(&b.join("simulate.json"));
    assert_eq!(ra["seed"], 11);
    assert_eq!(rb["seed"], 12);
    assert_eq!(ra["exact_mean"], rb["exact_mean"]);
    assert_eq!(ra["exact_var"], rb["exact_var"]);
    assert_ne!(ra["mean"], rb["mean"]);
}

#[test]
fn stdout_report_round_trips() {
    let tmp = TempDir::new().unwrap();
    let s = scenario(tmp.path(), &format!(r#"{COIN}, "observable": {{"kind": "coordinate"}}, "analysis": {{"moments": {{"n_grid": [10]}}}}"#));
    let o = mllt(&["moments", "--scenario", s.to_str().unwrap(), "--stdout"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((r["points"][0]["mean"].as_f64().unwrap() - 5.0).abs() < 1e-12);
    assert!((r["points"][0]["var"].as_f64().unwrap() - 2.5).abs() < 1e-12);
}

#[test]
fn run_executes_configured_analyses() {
    let tmp = TempDir::new().unwrap();
    let body = format!(
        r#"{COIN}, "observable": {{"kind": "coordinate"}},
        "analysis": {{"validate": {{}}, "moments": {{"n_grid": [50]}}}}"#
    );
    let s = scenario(tmp.path(), &body);
    let o = run("run", &s, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(tmp.path().join("validate.json").exists());
    assert!(tmp.path().join("moments.json").exists());
    assert!(!tmp.path().join("llt.json").exists());
}

#[test]
fn unknown_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let s = scenario(tmp.path(), &format!(r#"{COIN}, "analysis": {{"validate": {{"phi": 3}}}}"#));
    let o = run("validate", &s, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("schema error"), "{}", stderr(&o));
}

#[test]
fn bad_flags_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let s = scenario(tmp.path(), COIN);
    let o = mllt(&["validate", "--scenario", s.to_str().unwrap(), "--out", "x", "--stdout"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run("validate", &s, tmp.path(), &["--tolerance", "-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(mllt(&["--help"]).status.code(), Some(0));
}

#[test]
fn missing_analysis_block_is_an_error() {
    let tmp = TempDir::new().unwrap();
    let s = scenario(tmp.path(), &format!(r#"{COIN}, "observable": {{"kind": "coordinate"}}"#));
    let o = run("edgeworth", &s, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("analysis.edgeworth"));
}

#[test]
fn bundled_scenarios_pass() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(files.len() >= 6);
    for f in files {
        let tmp = TempDir::new().unwrap();
        let o = run("run", &f, tmp.path(), &[]);
        assert_eq!(o.status.code(), Some(0), "{}: {}", f.display(), stderr(&o));
    }
}

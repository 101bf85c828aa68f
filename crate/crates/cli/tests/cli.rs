use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multipoint"))
}

fn write_config(name: &str, body: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("multipoint-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("valid JSON on stdout")
}

const LINEAR: &str = r#"{"r": "1", "bc_minus": {"alphas": [0.5], "etas": [0]}, "bc_plus": {"alphas": [0.5], "etas": [0]}}"#;

#[test]
fn spectrum_reports_schema_and_eigenvalues() {
    let cfg = write_config("linear.json", LINEAR);
    let v = json(
        &bin()
            .args(["spectrum", "--config"])
            .arg(&cfg)
            .args(["--kmax", "2"])
            .output()
            .unwrap(),
    );
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["command"], "spectrum");
    let text = v.to_string();
    assert!(text.contains("1.0966"), "pi^2/9 missing from {text}");
}

#[test]
fn oracle_command_runs() {
    let cfg = write_config("oracle.json", LINEAR);
    let v = json(
        &bin()
            .args(["oracle", "--config"])
            .arg(&cfg)
            .args(["--kmax", "2", "--oracle-n", "400"])
            .output()
            .unwrap(),
    );
    assert_eq!(v["command"], "oracle");
}

#[test]
fn usage_error_exits_with_two() {
    let out = bin()
        .args(["spectrum", "--kmax", "notanumber"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_error_exits_with_one() {
    let out = bin()
        .args(["spectrum", "--config", "/nonexistent/config.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn nonres_without_f_is_an_error() {
    let cfg = write_config("nof.json", LINEAR);
    let out = bin()
        .args(["nonres", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn branch_csv_writes_both_files() {
    let cfg = write_config(
        "branch.json",
        r#"{"r": "1", "bc_minus": {"alphas": [0], "etas": [0]}, "bc_plus": {"alphas": [0], "etas": [0]}, "g": "(1+15*u^2)/(1+u^2)"}"#,
    );
    let out_path = cfg.with_file_name("branch.csv");
    let out = bin()
        .args(["branch", "--config"])
        .arg(&cfg)
        .args(["--k", "1", "--format", "csv", "--out"])
        .arg(&out_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(&out_path).unwrap();
    assert!(csv.starts_with("lambda,sup_norm,k,nu"));
    assert!(cfg.with_file_name("branch.solution.csv").exists());
}

#[test]
fn scenario_example2_runs() {
    let v = json(
        &bin()
            .args(["scenario", "example2", "--oracle-n", "1500"])
            .output()
            .unwrap(),
    );
    assert_eq!(v["command"], "scenario example2");
}

#[test]
fn output_is_deterministic() {
    let cfg = write_config(
        "det.json",
        r#"{"r": "1 + 0.3*sin(x)", "bc_minus": {"alphas": [0.2], "etas": [0.1]}, "bc_plus": {"alphas": [-0.3], "etas": [0.4]}}"#,
    );
    let run = || bin().args(["spectrum", "--config"]).arg(&cfg).args(["--kmax", "5"]).output().unwrap();
    let (a, b) = (run(), run());
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

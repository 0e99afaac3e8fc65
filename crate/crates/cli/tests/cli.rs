use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vlc_secrecy_cli::csv::HEADER;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vlc-secrecy"))
}

fn scenario(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().env_remove("VLC_SECRECY_THREADS").args(args).output().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(HEADER));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn sweep(args: &[&str]) -> (i32, String, String) {
    let out = run(args);
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn rate_sweep_on_group1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "g1.json", r#"{"preset": "group1", "alpha": 0.5, "snr_db": [0,5,10,15,20,25,30,35,40,45,50,55,60,65,70]}"#);
    let (code, stdout, _) = sweep(&["rate", "--config", cfg.to_str().unwrap(), "--out", "-"]);
    assert_eq!(code, 0);
    let rows = csv_rows(&stdout);
    assert_eq!(rows.len(), 15);
    for r in &rows {
        assert_eq!(r[1], "direct");
        assert!(r[2].parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "e.json", r#"{"preset": "group1", "alpha": 0.5, "snr_db": []}"#);
    let out = dir.path().join("out.csv");
    let (code, _, _) = sweep(&["rate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(std::fs::read_to_string(out).unwrap(), format!("{HEADER}\n"));
}

#[test]
fn schema_and_case_errors_set_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = scenario(dir.path(), "a.json", r#"{"preset": "group1", "alpha": 1.2}"#);
    let (code, _, err) = sweep(&["rate", "--config", bad.to_str().unwrap(), "--out", "-"]);
    assert_eq!(code, 2);
    assert!(err.contains("alpha"), "{err}");

    let missing = dir.path().join("missing.json");
    assert_eq!(sweep(&["rate", "--config", missing.to_str().unwrap(), "--out", "-"]).0, 2);

    let wrong = scenario(dir.path(), "c.json", r#"{"preset": "group1", "alpha": 0.3, "schemes": ["fc-case2"]}"#);
    let (code, _, err) = sweep(&["optimize", "--config", wrong.to_str().unwrap(), "--out", "-"]);
    assert_eq!(code, 3);
    assert!(err.contains("fc-case2"), "{err}");

    let unsupported = scenario(dir.path(), "u.json", r#"{"hb": [[1, 0.5]], "he": [[1, 0], [0, 1], [1, 1]], "alpha": 0.3}"#);
    assert_eq!(sweep(&["rate", "--config", unsupported.to_str().unwrap(), "--out", "-"]).0, 3);

    let ok = scenario(dir.path(), "ok.json", r#"{"preset": "group1", "alpha": 0.3, "snr_db": [0]}"#);
    let out = bin()
        .env("VLC_SECRECY_THREADS", "zero")
        .args(["rate", "--config", ok.to_str().unwrap(), "--out", "-"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fully_connected_beats_direct_on_group1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "g1.json",
        r#"{"preset": "group1", "alpha": 0.3, "snr_db": [0, 20, 40, 70], "schemes": ["direct", "fc", "fc-zf"]}"#,
    );
    let (code, stdout, _) = sweep(&["optimize", "--config", cfg.to_str().unwrap(), "--out", "-"]);
    assert_eq!(code, 0);
    let rows = csv_rows(&stdout);
    assert_eq!(rows.len(), 12);
    for chunk in rows.chunks(3) {
        assert_eq!(chunk.iter().map(|r| r[1].as_str()).collect::<Vec<_>>(), ["direct", "fc", "fc-zf"]);
        let direct: f64 = chunk[0][2].parse().unwrap();
        let fc: f64 = chunk[1][2].parse().unwrap();
        assert!(fc >= direct - 1e-9, "{chunk:?}");
        assert!(chunk[2][6].parse::<f64>().unwrap() <= 1e-6);
        assert!(chunk.iter().all(|r| r[7] == "ok"));
    }
}

#[test]
fn sub_connected_zero_forcing_reports_infeasibility() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "g2.json", r#"{"preset": "group2", "alpha": 0.3, "snr_db": [30], "schemes": ["sc-zf"]}"#);
    let (code, stdout, err) = sweep(&["optimize", "--config", cfg.to_str().unwrap(), "--out", "-"]);
    assert_eq!(code, 0);
    let rows = csv_rows(&stdout);
    assert_eq!(rows[0][7], "AllZFInfeasible");
    assert_eq!(rows[0][2], "");
    assert!(err.contains("least-squares"), "{err}");
}

#[test]
fn case2_requests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "c2.json",
        r#"{"preset": "group1-transposed", "alpha": 0.3, "snr_db": [10], "schemes": ["direct", "fc-case2", "fc-zf", "sc"]}"#,
    );
    let (code, stdout, err) = sweep(&["optimize", "--config", cfg.to_str().unwrap(), "--out", "-"]);
    assert_eq!(code, 0);
    let rows = csv_rows(&stdout);
    let direct: f64 = rows[0][2].parse().unwrap();
    let fc: f64 = rows[1][2].parse().unwrap();
    assert!((fc - direct).abs() <= 0.02 * direct);
    assert_eq!(rows[2][7], "ZfInfeasible");
    assert!(err.contains("full column rank"), "{err}");
    assert_eq!(rows[3][7], "Degenerate");
    assert_eq!(rows[3][2], rows[0][2]);
}

#[test]
fn log_base_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(dir.path(), "b.json", r#"{"preset": "group2", "alpha": 0.4, "snr_db": [25]}"#);
    let c = cfg.to_str().unwrap();
    let bits: f64 = csv_rows(&sweep(&["rate", "--config", c, "--out", "-"]).1)[0][2].parse().unwrap();
    let nats: f64 = csv_rows(&sweep(&["rate", "--config", c, "--out", "-", "--log-base", "e"]).1)[0][2].parse().unwrap();
    assert!((bits * std::f64::consts::LN_2 - nats).abs() < 1e-10);
}

#[test]
fn optimize_overrides_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario(
        dir.path(),
        "d.json",
        r#"{"preset": "group2", "alpha": 0.3, "snr_db": [0, 20], "schemes": ["direct", "fc", "sc-mlse"]}"#,
    );
    let c = cfg.to_str().unwrap();
    let args = ["optimize", "--config", c, "--out", "-", "--no-wall-clock"];
    let first = sweep(&args).1;
    let second = bin().env("VLC_SECRECY_THREADS", "1").args(args).output().unwrap();
    assert_eq!(first, String::from_utf8(second.stdout).unwrap());
    assert!(csv_rows(&first).iter().all(|r| r[8].is_empty()));

    let capped = csv_rows(&sweep(&["optimize", "--config", c, "--out", "-", "--max-iters", "2", "--tol", "1e-12"]).1);
    assert!(capped.iter().filter(|r| r[1] == "fc").all(|r| r[3] == "2" && r[4] == "MaxIters"));
    assert!(capped.iter().all(|r| !r[8].is_empty()));
}

#[test]
fn validate_command() {
    let out = run(&["validate"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(text.lines().filter(|l| l.starts_with("PASS")).count() >= 10);

    let out = run(&["validate", "--perturb-gradient", "1e-3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(text.lines().any(|l| l.starts_with("FAIL gradient")), "{text}");

    let out = run(&["validate", "--tol", "1e-2"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(text.contains("non-default"));
}

#[test]
fn bad_arguments_exit_with_usage_error() {
    assert_eq!(run(&["optimize", "--config"]).status.code(), Some(2));
    assert_eq!(run(&["rate", "--config", "x", "--out", "-", "--log-base", "10"]).status.code(), Some(2));
}

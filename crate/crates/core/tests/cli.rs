#![allow(clippy::excessive_precision)]

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_hopf-heat");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn eval_value(args: &[&str]) -> (f64, String) {
    let mut full = vec!["eval"];
    full.extend_from_slice(args);
    let o = run(&full);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut it = out.split_whitespace();
    let v = it.next().unwrap().parse().unwrap();
    (v, it.next().unwrap().to_string())
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["t", "r", "theta", "value", "method"]
    );
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn eval_diagonal_value() {
    let (v, method) = eval_value(&["--kernel", "p", "--t", "1", "--r", "0", "--theta", "0"]);
    assert!((v - 1.6760791769577472908).abs() < 1e-12);
    assert_eq!(method, "series");
}

#[test]
fn eval_qtilde_at_the_pole() {
    let (v, _) = eval_value(&["--kernel", "qtilde", "--t", "1", "--r", "0"]);
    let want: f64 = (0..20)
        .map(|k| f64::from(2 * k + 1) * (-4.0 * f64::from(k * (k + 1))).exp())
        .sum();
    assert!((v - want).abs() < 1e-14 * want);
}

#[test]
fn eval_methods_agree() {
    let args = ["--kernel", "p", "--t", "0.3", "--r", "0.4", "--theta", "1.2"];
    let (a, ma) = eval_value(&[&args[..], &["--method", "integral"]].concat());
    let (b, mb) = eval_value(&[&args[..], &["--method", "series"]].concat());
    assert_eq!((ma.as_str(), mb.as_str()), ("integral", "series"));
    assert!((a - b).abs() <= 1e-8 * b);
    let (q, _) = eval_value(&["--kernel", "q", "--t", "0.5", "--x", "1.2"]);
    assert!((q - 2.3530601035762570143).abs() < 1e-10 * q);
    let (qt, _) = eval_value(&["--kernel", "qt", "--t", "1", "--r", "0.3", "--theta", "0.5"]);
    assert!((qt - 1.1687880585164802178).abs() < 1e-11 * qt);
}

#[test]
fn eval_domain_errors_exit_2() {
    for args in [
        &["eval", "--kernel", "p", "--t", "-1", "--r", "0", "--theta", "0"][..],
        &["eval", "--kernel", "p", "--t", "1", "--r", "2", "--theta", "0"],
        &["eval", "--kernel", "p", "--t", "1", "--theta", "0"],
        &["eval", "--kernel", "q", "--t", "1", "--x", "-1.5"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = run(&["eval", "--kernel", "p", "--t", "1", "--r", "2", "--theta", "0"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("r must lie"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["eval", "--kernel", "nope", "--t", "1"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn verify_unknown_suite_and_missing_seed() {
    let o = run(&["verify", "--suite", "bogus", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["verify", "--suite", "rigidity"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let o = run(&["verify", "--suite", "rigidity", "--seed", "1", "--tol-overrides", "nope=1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_rigidity_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let csv = dir.path().join("report.csv");
    let o = run(&[
        "verify", "--suite", "rigidity", "--n", "500", "--seed", "7",
        "--out", json.to_str().unwrap(), "--csv", csv.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["schema"], "hopf-heat/report/v1");
    assert_eq!(report["suite"], "rigidity");
    assert_eq!(report["seed"], 7);
    assert_eq!(report["status"], "pass");
    let checks = report["checks"].as_array().unwrap();
    let iso = checks.iter().find(|c| c["name"] == "s3-isometry").unwrap();
    assert!(iso["residual"].as_f64().unwrap() <= 1e-9);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("check,status,residual,threshold,comparison"));
    assert_eq!(text.lines().count(), checks.len() + 1);
}

#[test]
fn failing_check_exits_1_and_still_writes() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("report.json");
    let o = run(&[
        "verify", "--suite", "rigidity", "--n", "200", "--seed", "7",
        "--tol-overrides", "s3-isometry=1e-300", "--out", json.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["status"], "fail");
}

#[test]
fn config_file_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hopf.toml");
    std::fs::write(&cfg, "seed = 7\n[verify]\nn = 200\n[thresholds]\ns3-isometry = 1e-300\nldp = 0.5\n").unwrap();
    let cfg = cfg.to_str().unwrap();
    let o = run(&["--config", cfg, "verify", "--suite", "rigidity"]);
    assert_eq!(o.status.code(), Some(1), "file threshold applies");
    let o = run(&[
        "--config", cfg, "verify", "--suite", "rigidity", "--tol-overrides", "s3-isometry=1e-9",
    ]);
    assert_eq!(o.status.code(), Some(0), "flag beats file");
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["seed"], 7);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "colour = 3\n").unwrap();
    let o = run(&["--config", bad.to_str().unwrap(), "eval", "--kernel", "p", "--t", "1", "--r", "0", "--theta", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["--config", "/nonexistent/x.toml", "verify", "--suite", "rigidity"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn embed_writes_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("embed.json");
    let o = run(&["embed", "--n", "120", "--seed", "3", "--pairs", "500", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["schema"], "hopf-heat/embed/v1");
    let pts = v["points"].as_array().unwrap();
    assert_eq!(pts.len(), 120);
    for p in pts {
        let s3: Vec<f64> = serde_json::from_value(p["s3"].clone()).unwrap();
        let s2: Vec<f64> = serde_json::from_value(p["s2"].clone()).unwrap();
        assert_eq!((s3.len(), s2.len()), (4, 3));
        assert!((s3.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-10);
        assert!((s2.iter().map(|c| c * c).sum::<f64>() - 1.0).abs() < 1e-10);
    }
    for key in ["s3_report", "s2_report"] {
        let r = &v[key];
        assert!(r["max_isometry_residual"].as_f64().unwrap() <= 1e-9);
        assert!(r["min_gram_eigenvalue"].as_f64().unwrap() > 0.0);
        assert_eq!(r["pairs_checked"], 500);
        assert_eq!(r["seed"], 3);
    }
    let o = run(&["embed", "--n", "10", "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["embed", "--n", "100", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn table_shapes_and_symmetry() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let path = out.to_str().unwrap();
    let o = run(&["table", "--kernel", "p", "--t-grid", "0.5", "--r-grid", "0.2", "--theta-grid", "1", "--out", path]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_csv(&out).len(), 1);

    let o = run(&["table", "--kernel", "p", "--t-grid", "0.5", "--r-grid", "0.2", "--theta-grid", "-1.5:1.5:7", "--out", path]);
    assert_eq!(o.status.code(), Some(0));
    let rows = read_csv(&out);
    assert_eq!(rows.len(), 7);
    let vals: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    for i in 0..3 {
        assert!((vals[i] - vals[6 - i]).abs() <= 1e-14 * vals[i]);
    }

    for bad in ["", "1:2", "x", "0:1:0"] {
        let o = run(&["table", "--kernel", "p", "--t-grid", bad, "--r-grid", "0", "--out", path]);
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
    }
}

#[test]
fn golden_table() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/golden_table.csv");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let o = run(&[
        "table", "--kernel", "p", "--method", "series",
        "--t-grid", "0.1,0.3,1,3", "--r-grid", "0,0.3,0.7,1.2", "--theta-grid", "0,0.5,1.5,3",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let want = read_csv(&golden);
    let got = read_csv(&out);
    assert_eq!(want.len(), 64);
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g[..3], w[..3], "grid order");
        assert_eq!(g[4], w[4]);
        let (a, b): (f64, f64) = (g[3].parse().unwrap(), w[3].parse().unwrap());
        assert!((a - b).abs() <= 1e-12 * b, "{g:?} vs {w:?}");
    }
}

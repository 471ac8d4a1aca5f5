use std::f64::consts::{PI, SQRT_2};
use std::process::{Command, Output};

use num_complex::Complex64;

fn quasispec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quasispec")).args(args).output().unwrap()
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(out.stdout.as_slice());
    r.records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect()
}

#[test]
fn third_problem_spectrum_near_leading_terms() {
    let out = quasispec(&["spectrum", "--problem", "3", "--coeffs", "zero", "--nmax", "5", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 5);
    for row in rows {
        let n: f64 = row[0].parse().unwrap();
        let lam = Complex64::new(row[2].parse().unwrap(), row[3].parse().unwrap());
        let rho = Complex64::from_polar(lam.norm().sqrt().sqrt(), lam.arg().rem_euclid(2.0 * PI) / 4.0);
        let target = Complex64::from_polar(SQRT_2 * PI * n + PI / (2.0 * SQRT_2), PI / 4.0);
        assert!((rho - target).norm() < 0.1);
    }
}

#[test]
fn predict_second_problem() {
    let out = quasispec(&["predict", "--problem", "2", "--nmax", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let lam = doc["rows"][0]["re_lambda"].as_f64().unwrap();
    assert!((lam - (1.5 * PI).powi(4)).abs() < 1e-9);
    assert_eq!(doc["rows"][0]["re_beta"].as_f64().unwrap(), -4.0 * lam);
}

#[test]
fn selfcheck_passes() {
    let out = quasispec(&["selfcheck"]);
    assert_eq!(out.status.code(), Some(0));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().filter(|l| l.starts_with("PASS")).count(), 6, "{err}");
    assert!(!err.contains("FAIL"));
}

#[test]
fn output_is_deterministic() {
    let args = ["weights", "--problem", "1", "--coeffs", "dirac", "--nmax", "12", "--format", "csv"];
    let a = quasispec(&args);
    let b = quasispec(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let rows = csv_rows(&a);
    assert_eq!(rows.len(), 12);
    assert!(rows.iter().all(|r| r.len() == 8 && r[7] == "newton"));
}

#[test]
fn coefficient_file_and_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let coeffs = dir.path().join("c.json");
    let n = 33;
    let tau1: Vec<[f64; 2]> = (0..n).map(|i| [i as f64 / (n - 1) as f64, 0.0]).collect();
    let doc = serde_json::json!({ "grid": n, "tau2": "const:1", "tau1": tau1, "r0": "zero" });
    std::fs::write(&coeffs, doc.to_string()).unwrap();
    let target = dir.path().join("out.json");
    let out = quasispec(&[
        "spectrum",
        "--problem",
        "2",
        "--coeffs",
        coeffs.to_str().unwrap(),
        "--nmax",
        "3",
        "--out",
        target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
    assert!(doc["failures"].as_array().unwrap().is_empty());
}

#[test]
fn verify_reports_remainder_statistics() {
    let out = quasispec(&["verify", "--problem", "2", "--coeffs", "linear", "--nmax", "12", "--from", "3", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert!(text.lines().any(|l| l.starts_with("# l2_consistent=")));
    assert_eq!(text.lines().next().unwrap().split(',').count(), 13);
}

#[test]
fn malformed_input_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"grid\": 3, \"tau2\": \"zero\"}").unwrap();
    for args in [
        vec!["spectrum", "--problem", "3", "--coeffs", bad.to_str().unwrap()],
        vec!["spectrum", "--problem", "0"],
        vec!["weights", "--problem", "2", "--tol", "1e-3"],
        vec!["verify", "--problem", "2", "--nmax", "4"],
        vec!["spectrum", "--problem", "2", "--format", "xml"],
    ] {
        let out = quasispec(&args);
        assert_eq!(out.status.code(), Some(3), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn help_exits_cleanly() {
    let out = quasispec(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().contains("selfcheck"));
}

//! End-to-end tests of the `affinekit` binary: exit codes, determinism,
//! config precedence and output round-trips.

use std::io::Write;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_affinekit"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn json_results(out: &Output) -> serde_json::Value {
    let report: serde_json::Value =
        serde_json::from_str(&stdout_str(out)).expect("stdout is a JSON report");
    assert!(report.get("resolved_config").is_some(), "config echoed");
    report["results"].clone()
}

#[test]
fn price_backends_agree() {
    let common = [
        "--alpha", "4", "--beta", "0", "--b", "1", "--x", "1", "--t", "1", "--fn", "gaussian:0,1",
    ];
    let density = run(&[&["price"], &common[..], &["--method", "density"]].concat());
    let inversion = run(&[&["price"], &common[..], &["--method", "inversion"]].concat());
    assert!(density.status.success());
    assert!(inversion.status.success());
    let vd = json_results(&density)[0]["value"].as_f64().unwrap();
    let vi = json_results(&inversion)[0]["value"].as_f64().unwrap();
    assert!((vd - vi).abs() < 1e-8, "{vd} vs {vi}");
}

#[test]
fn mc_price_is_deterministic() {
    let args = [
        "price", "--alpha", "1", "--beta", "0.3", "--b", "0.5", "--x", "1", "--t", "1",
        "--method", "mc", "--n", "50000", "--seed", "7",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(stdout_str(&first), stdout_str(&second));
    let est = &json_results(&first)[0];
    assert!(est["std_error"].as_f64().unwrap() > 0.0);
    assert_eq!(est["n"].as_u64().unwrap(), 50000);
    assert_eq!(est["seed"].as_u64().unwrap(), 7);
}

#[test]
fn domain_errors_exit_2() {
    let out = run(&[
        "price", "--alpha", "0", "--b", "1", "--x", "1", "--t", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("alpha"), "stderr: {stderr}");
}

#[test]
fn feller_violation_exits_2() {
    let out = run(&[
        "greek", "--which", "ibp", "--alpha", "1", "--beta", "0", "--b", "0.4", "--x", "1",
        "--t", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("Feller"), "stderr: {stderr}");
}

#[test]
fn dbeta_weights_sum_to_zero_and_are_reported() {
    let out = run(&[
        "greek", "--which", "dbeta", "--alpha", "1", "--beta", "0.4", "--b", "0.5", "--x", "1",
        "--t", "1",
    ]);
    assert!(out.status.success());
    let g = &json_results(&out)[0];
    let weights: Vec<f64> = g["weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| w.as_f64().unwrap())
        .collect();
    assert_eq!(weights.len(), 3);
    assert!(weights.iter().sum::<f64>().abs() < 1e-12);
    assert_eq!(g["shifted_params"].as_array().unwrap().len(), 3);
}

#[test]
fn euler_csv_round_trips() {
    let out = run(&[
        "simulate", "--which", "euler", "--alpha", "1", "--beta", "-0.5", "--b", "1", "--x",
        "0.8", "--t", "1", "--steps", "16", "--seed", "3",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    assert!(!text.contains('\r'), "LF line endings only");
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("time,value"));
    let rows: Vec<(f64, f64)> = lines
        .map(|l| {
            let (t, v) = l.split_once(',').expect("two columns");
            (t.parse().unwrap(), v.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 17);
    assert_eq!(rows[0], (0.0, 0.8));
    assert!(rows.iter().all(|(_, v)| *v >= 0.0));

    // Determinism: identical bytes on a second run.
    let again = run(&[
        "simulate", "--which", "euler", "--alpha", "1", "--beta", "-0.5", "--b", "1", "--x",
        "0.8", "--t", "1", "--steps", "16", "--seed", "3",
    ]);
    assert_eq!(stdout_str(&again), text);
}

#[test]
fn exact_samples_csv_shape() {
    let out = run(&[
        "simulate", "--which", "exact", "--alpha", "1", "--beta", "0", "--b", "1", "--x", "1",
        "--t", "1", "--n", "100", "--seed", "5",
    ]);
    assert!(out.status.success());
    let text = stdout_str(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample,value"));
    assert_eq!(lines.count(), 100);
}

#[test]
fn gw_ensemble_runs_and_round_trips() {
    let out = run(&[
        "gw", "--fn", "geom:0.5", "--n", "50", "--steps", "100", "--x", "1", "--t", "0.5",
        "--seed", "11", "--output", "json",
    ]);
    assert!(out.status.success());
    let results = json_results(&out);
    assert_eq!(results[0]["values"].as_array().unwrap().len(), 50);
    assert!((results[0]["offspring_mean"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn config_file_fills_gaps_and_flags_win() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(
        file,
        r#"{{"alpha": 1.0, "beta": 0.0, "b": 1.0, "x": 1.0, "t": 1.0, "method": "density"}}"#
    )
    .unwrap();
    let path = file.path().to_str().unwrap();
    let out = run(&["price", "--config", path, "--alpha", "4"]);
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let cfg = &report["resolved_config"];
    assert_eq!(cfg["alpha"].as_f64().unwrap(), 4.0); // flag overrides file
    assert_eq!(cfg["b"].as_f64().unwrap(), 1.0); // file fills the gap
    assert_eq!(cfg["method"].as_str().unwrap(), "density");
}

#[test]
fn multi_coordinate_greek_via_config() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(
        file,
        r#"{{
            "coords": [
                {{"alpha": 1.0, "beta": -1.0, "b": 1.0}},
                {{"alpha": 0.5, "beta": 0.0, "b": 0.7}}
            ],
            "x": [0.8, 1.2],
            "fns": ["gaussian:0.5,1", "gaussian:1,0.8"]
        }}"#
    )
    .unwrap();
    let path = file.path().to_str().unwrap();
    let out = run(&[
        "greek", "--which", "delta", "--coordinate", "1", "--t", "0.75", "--config", path,
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8(out.stderr).unwrap());
    let g = &json_results(&out)[0];
    assert_eq!(g["weights"].as_array().unwrap().len(), 2);

    // --k is an alias for --coordinate.
    let alias = run(&[
        "greek", "--which", "delta", "--k", "1", "--t", "0.75", "--config", path,
    ]);
    assert_eq!(stdout_str(&alias), stdout_str(&out));
}

#[test]
fn verify_core_suite_passes_with_machine_output() {
    let out = run(&["verify", "--suite", "core", "--output", "json"]);
    assert!(out.status.success(), "core suite must be green");
    let report: serde_json::Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 10);
    assert!(checks.iter().all(|c| c["pass"].as_bool().unwrap()));

    let csv = run(&["verify", "--suite", "core", "--output", "csv"]);
    assert!(csv.status.success());
    let text = stdout_str(&csv);
    assert!(text.starts_with("name,target,achieved,pass\n"));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let out = run(&["verify", "--suite", "everything"]);
    assert_eq!(out.status.code(), Some(2));
}

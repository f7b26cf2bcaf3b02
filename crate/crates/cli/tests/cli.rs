use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const STRIP: &str = r#"{"builtin":"minkowski_strip","a":0,"b":1,"n":2}"#;

fn mwc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mwc"))
        .args(args)
        .env("MWC_THREADS", "1")
        .output()
        .expect("spawn mwc")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn strip_connect(extra: &[&str]) -> Output {
    let mut args = vec!["connect", "--model", STRIP, "--tau0", "0.2", "--tau1", "0.8", "--l", "0.3,0.1"];
    args.extend_from_slice(extra);
    mwc(&args)
}

#[test]
fn catalog_lists_builtins() {
    let out = mwc(&["catalog"]);
    assert!(out.status.success());
    let names: Vec<String> = json(&out)
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["name"].as_str().unwrap().to_string())
        .collect();
    for want in ["minkowski_strip", "de_sitter_grw", "schwarzschild_interior", "reissner_nordstrom_intermediate"] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
}

#[test]
fn conditions_on_flat_strip() {
    // A finite slab only keeps the weakest condition.
    let v = json(&mwc(&["conditions", "--model", STRIP]));
    assert_eq!(v["cond_24"], false);
    assert_eq!(v["cond_28"], false);
    assert_eq!(v["cond_star"], true);

    let out = mwc(&["conditions", "--model", r#"{"builtin":"minkowski_strip","n":2}"#]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["cond_24"], true);
    assert_eq!(v["cond_star"], true);
}

#[test]
fn model_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.json");
    fs::write(&path, r#"{"builtin":"de_sitter_grw"}"#).unwrap();
    let out = mwc(&["conditions", "--model", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(json(&out)["cond_star"], false);
}

#[test]
fn connect_then_verify_report() {
    let out = strip_connect(&["--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["status"], "connected");
    assert_eq!(report["seed"], 7);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    fs::write(&path, &out.stdout).unwrap();
    let out = mwc(&["verify", "--model", STRIP, "--candidate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["pass"], true);

    // The bare candidate is accepted too.
    let bare = &report["candidates"][0]["candidate"];
    fs::write(&path, bare.to_string()).unwrap();
    let out = mwc(&["verify", "--model", STRIP, "--candidate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn verify_rejects_perturbed_candidate() {
    let report = json(&strip_connect(&[]));
    let mut cand = report["candidates"][0]["candidate"].clone();
    let tau1 = cand["tau1"].as_f64().unwrap();
    cand["tau1"] = Value::from(tau1 - 0.1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cand.json");
    fs::write(&path, cand.to_string()).unwrap();
    let out = mwc(&["verify", "--model", STRIP, "--candidate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["pass"], false);
}

#[test]
fn not_connected_exit_code() {
    let out = mwc(&["connect", "--model", r#"{"builtin":"de_sitter_grw"}"#, "--tau0", "0", "--tau1", "1.5", "--l", "12.566"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["status"], "not_connected");
}

#[test]
fn problem_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("strip.json"), STRIP).unwrap();
    let cfg = dir.path().join("problem.json");
    fs::write(
        &cfg,
        r#"{"model":"strip.json","tau0":0.2,"tau1":0.5,"l":[0.3,0.1],"resolution":{"k_steps":33}}"#,
    )
    .unwrap();
    let out = mwc(&["connect", "--config", cfg.to_str().unwrap(), "--tau1", "0.8"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["problem"]["tau1"], 0.8);
}

#[test]
fn classify_reversed_pair() {
    let out = mwc(&["classify", "--model", STRIP, "--tau0", "0.8", "--tau1", "0.2", "--l", "0.3,0.1"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["kind"], "timelike");
    assert_eq!(v["reversed"], true);

    let out = mwc(&["classify", "--model", STRIP, "--tau0", "0.2", "--tau1", "0.3", "--l", "0.3,0.1"]);
    assert_eq!(json(&out)["kind"], "none");
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn mu_map_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mu.csv");
    let out = mwc(&[
        "mu-map", "--model", STRIP, "--tau0", "0.2", "--tau1", "0.8", "--l", "0.3,0.1", "--k-steps", "5", "--c-steps", "3",
        "--out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = csv_rows(&path);
    assert_eq!(header, ["y1", "K", "mu_2", "s1", "fake", "escape_end"]);
    assert_eq!(rows.len(), 15);
    for row in &rows {
        let y: f64 = row[0].parse().unwrap();
        assert!(y > 0.0 && y < 1.0);
        assert!(row[4] == "true" || row[4] == "false");
    }
}

#[test]
fn mu_map_needs_two_factors() {
    let out = mwc(&["mu-map", "--model", r#"{"builtin":"de_sitter_grw"}"#, "--tau0", "0", "--tau1", "1", "--l", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn bad_input_exits_2() {
    // Endpoint outside the interval.
    let out = mwc(&["connect", "--model", STRIP, "--tau0", "0.2", "--tau1", "3", "--l", "1,1"]);
    assert_eq!(out.status.code(), Some(2));
    // Wrong number of fiber distances.
    let out = mwc(&["connect", "--model", STRIP, "--tau0", "0.2", "--tau1", "0.8", "--l", "1"]);
    assert_eq!(out.status.code(), Some(2));
    // Unknown builtin.
    let out = mwc(&["conditions", "--model", r#"{"builtin":"nope"}"#]);
    assert_eq!(out.status.code(), Some(2));
    // Unknown flag.
    let out = mwc(&["connect", "--bogus"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(!stderr.is_empty());
}

#[test]
fn bad_thread_count() {
    let out = Command::new(env!("CARGO_BIN_EXE_mwc"))
        .arg("catalog")
        .env("MWC_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

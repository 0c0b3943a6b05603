//! End-to-end tests running the compiled binary against small fixtures.

use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const QUARTET_TREE: &str = "((a:1,b:1):1,c:1,d:1);\n";
const QUARTET_DIST: &str = "4\na 0 2 3 3\nb 2 0 3 3\nc 3 3 0 2\nd 3 3 2 0\n";

/// Asymmetric five-leaf tree and its exact additive distances.
const FIVE_TREE: &str = "((a:1,b:2):1,(c:1,d:3):2,e:1);\n";
const FIVE_DIST: &str = "5\n\
    a 0 3 5 7 3\n\
    b 3 0 6 8 4\n\
    c 5 6 0 4 4\n\
    d 7 8 4 0 6\n\
    e 3 4 4 6 0\n";
/// Entrywise squares of `FIVE_DIST`: positive, symmetric, and not
/// semi-multiplicative on `FIVE_TREE` (e.g. the a,b x c,d block has
/// 25*64 != 49*36).
const FIVE_VAR_SQUARES: &str = "5\n\
    a 0 9 25 49 9\n\
    b 9 0 36 64 16\n\
    c 25 36 0 16 16\n\
    d 49 64 16 0 36\n\
    e 9 16 16 36 0\n";

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_wlstrees"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, contents: &str) -> String {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout_str(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("stderr not JSON ({e}): {text}"))
}

fn read_json(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn estimate_ols_recovers_unit_quartet() {
    let dir = TempDir::new().unwrap();
    let tree = write(&dir, "t.nwk", QUARTET_TREE);
    let dist = write(&dir, "d.phy", QUARTET_DIST);
    let out = run(&["estimate", &tree, &dist], &[]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let newick = stdout_str(&out);
    assert_eq!(newick.matches(":1").count(), 5, "all five branches unit: {newick}");
    assert!(newick.trim_end().ends_with(';'));
}

#[test]
fn estimate_bme_reports_closed_form() {
    let dir = TempDir::new().unwrap();
    let tree = write(&dir, "t.nwk", QUARTET_TREE);
    let dist = write(&dir, "d.phy", QUARTET_DIST);
    let report = dir.path().join("r.json").to_str().unwrap().to_owned();
    let out = run(
        &["estimate", &tree, &dist, "--variance", "bme", "--report", &report],
        &[],
    );
    assert!(out.status.success());
    let rep = read_json(&report);
    assert_eq!(rep["schema"], "wlstrees/run-report/v1");
    assert_eq!(rep["command"], "estimate");
    let est = &rep["estimate"];
    assert_eq!(est["method"], "closed-form");
    assert!((est["tree_length"].as_f64().unwrap() - 5.0).abs() < 1e-9);
    assert!(est["weighted_rss"].as_f64().unwrap() < 1e-18);
    assert_eq!(est["edges"].as_array().unwrap().len(), 5);
}

#[test]
fn estimate_with_failing_variance_file_falls_back_to_dense() {
    let dir = TempDir::new().unwrap();
    let tree = write(&dir, "t.nwk", FIVE_TREE);
    let dist = write(&dir, "d.phy", FIVE_DIST);
    let var = write(&dir, "v.phy", FIVE_VAR_SQUARES);
    let report = dir.path().join("r.json").to_str().unwrap().to_owned();
    let out = run(
        &[
            "estimate", &tree, &dist, "--variance", "file", "--var-file", &var,
            "--report", &report,
        ],
        &[],
    );
    assert!(out.status.success());
    let rep = read_json(&report);
    assert_eq!(rep["estimate"]["method"], "dense-fallback");
    let warnings = rep["warnings"].as_array().unwrap();
    assert!(
        warnings.iter().any(|w| w.as_str().unwrap().contains("semi-multiplicative")),
        "expected a fallback warning, got {warnings:?}"
    );
    // Noiseless distances: the estimate must still match the generating
    // lengths up to solver roundoff.
    let fitted = wlstrees::io::parse_newick(&stdout_str(&out)).unwrap();
    let truth = wlstrees::io::parse_newick(FIVE_TREE).unwrap();
    let fitted_lengths = fitted.require_lengths().unwrap();
    let truth_lengths = truth.require_lengths().unwrap();
    for e in 0..truth.tree.edge_count() {
        let key = truth.tree.split_key(e);
        let f = (0..fitted.tree.edge_count())
            .find(|&g| fitted.tree.split_key(g) == key)
            .unwrap();
        assert!(
            (fitted_lengths.get(f) - truth_lengths.get(e)).abs() < 1e-9,
            "edge {key:?} off: {} vs {}",
            fitted_lengths.get(f),
            truth_lengths.get(e)
        );
    }
}

#[test]
fn check_fourpoint_passes_on_additive_distances() {
    let dir = TempDir::new().unwrap();
    let dist = write(&dir, "d.phy", FIVE_DIST);
    let out = run(&["check", &dist, "--mode", "fourpoint"], &[]);
    assert!(out.status.success());
    let rep: Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(rep["check"]["pass"], true);
    assert_eq!(rep["check"]["mode"], "fourpoint");
}

#[test]
fn check_fourpoint_strict_fails_on_perturbed_distances() {
    let dir = TempDir::new().unwrap();
    // Bump the diameter pair b,d: it sits in a large sum of the quartet
    // {a,b,c,d}, so the two largest sums stop agreeing. (A cherry pair
    // would only move the small sum and stay additive-consistent.)
    let perturbed = FIVE_DIST
        .replace("b 3 0 6 8 4", "b 3 0 6 8.4 4")
        .replace("d 7 8 4 0 6", "d 7 8.4 4 0 6");
    let dist = write(&dir, "d.phy", &perturbed);
    let out = run(&["check", &dist, "--mode", "fourpoint", "--strict"], &[]);
    assert_eq!(out.status.code(), Some(4));
    let rep: Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(rep["check"]["pass"], false);
    assert!(rep["check"]["worst"]["relative_violation"].as_f64().unwrap() > 0.0);
    let err = stderr_json(&out);
    assert_eq!(err["schema"], "wlstrees/error/v1");
    assert_eq!(err["kind"], "check-failed");
    assert_eq!(err["exit_code"], 4);
}

#[test]
fn check_iip_passes_for_bme_and_fails_for_fm() {
    let dir = TempDir::new().unwrap();
    let tree = write(&dir, "t.nwk", FIVE_TREE);
    let dist = write(&dir, "d.phy", FIVE_DIST);

    let good = run(
        &["check", &dist, "--mode", "iip", "--tree", &tree, "--variance", "bme"],
        &[],
    );
    assert!(good.status.success());
    let rep: Value = serde_json::from_str(&stdout_str(&good)).unwrap();
    assert_eq!(rep["check"]["pass"], true);

    let bad = run(
        &["check", &dist, "--mode", "iip", "--tree", &tree, "--variance", "fm"],
        &[],
    );
    assert!(bad.status.success(), "non-strict check reports, never errors");
    let rep: Value = serde_json::from_str(&stdout_str(&bad)).unwrap();
    assert_eq!(rep["check"]["pass"], false);
    let offenders = rep["check"]["offenders"].as_array().unwrap();
    assert!(!offenders.is_empty());
    assert!(offenders[0]["leaves"].as_array().unwrap().len() == 2);
    assert!(offenders[0]["coefficient"].as_f64().is_some());
}

#[test]
fn simulate_with_zero_sd_reproduces_additive_distances() {
    let dir = TempDir::new().unwrap();
    let tree = write(&dir, "t.nwk", FIVE_TREE);
    let out_dist = dir.path().join("d.phy").to_str().unwrap().to_owned();
    let out_var = dir.path().join("v.phy").to_str().unwrap().to_owned();
    let out = run(
        &[
            "simulate", &tree, "--model", "gauss-const", "--sd", "0",
            "--out-dist", &out_dist, "--out-var", &out_var,
        ],
        &[],
    );
    assert!(out.status.success());
    let written = std::fs::read_to_string(&out_dist).unwrap();
    for row in FIVE_DIST.lines().skip(1) {
        let mut parts = row.split_whitespace();
        let label = parts.next().unwrap();
        let rendered: Vec<&str> = parts.collect();
        let line = written
            .lines()
            .find(|l| l.trim_start().starts_with(label))
            .unwrap();
        for v in &rendered {
            assert!(line.contains(v), "row {label}: expected {v} in {line}");
        }
    }
    let rep: Value = serde_json::from_str(&stdout_str(&out)).unwrap();
    assert_eq!(rep["simulate"]["leaves"], 5);
}

#[test]
fn simulate_is_deterministic_under_a_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let tree = write(&dir, "t.nwk", FIVE_TREE);
    let out_dist = dir.path().join("d.phy").to_str().unwrap().to_owned();
    let out_var = dir.path().join("v.phy").to_str().unwrap().to_owned();
    let args = [
        "simulate", &tree, "--model", "gauss-jc", "--seqlen", "500",
        "--seed", "42", "--out-dist", &out_dist, "--out-var", &out_var,
    ];

    let first = run(&args, &[]);
    assert!(first.status.success());
    let dist1 = std::fs::read(&out_dist).unwrap();
    let var1 = std::fs::read(&out_var).unwrap();

    let second = run(&args, &[]);
    assert!(second.status.success());
    assert_eq!(dist1, std::fs::read(&out_dist).unwrap(), "distance files differ");
    assert_eq!(var1, std::fs::read(&out_var).unwrap(), "variance files differ");

    let strip = |out: &Output| -> Value {
        let mut rep: Value = serde_json::from_str(&stdout_str(out)).unwrap();
        rep.as_object_mut().unwrap().remove("timings_ms");
        rep
    };
    assert_eq!(strip(&first), strip(&second), "reports differ beyond timings");
}

#[test]
fn malformed_inputs_exit_two_with_located_error_json() {
    let dir = TempDir::new().unwrap();
    let tree = write(&dir, "t.nwk", "((a:1,b:1):1,c:1,d:1"); // unbalanced
    let dist = write(&dir, "d.phy", QUARTET_DIST);
    let out = run(&["estimate", &tree, &dist], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout_str(&out).is_empty());
    let err = stderr_json(&out);
    assert_eq!(err["schema"], "wlstrees/error/v1");
    assert_eq!(err["kind"], "input");
    assert!(err["message"].as_str().unwrap().contains("at byte"));

    let missing = run(&["estimate", "/nonexistent/tree.nwk", &dist], &[]);
    assert_eq!(missing.status.code(), Some(2));
    assert_eq!(stderr_json(&missing)["kind"], "input");
}

#[test]
fn thread_cap_env_var_is_honored() {
    let dir = TempDir::new().unwrap();
    let tree = write(&dir, "t.nwk", QUARTET_TREE);
    let dist = write(&dir, "d.phy", QUARTET_DIST);
    let out = run(&["estimate", &tree, &dist], &[("WLSTREES_THREADS", "1")]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).is_empty(), "no warnings expected");

    let noisy = run(&["estimate", &tree, &dist], &[("WLSTREES_THREADS", "bogus")]);
    assert!(noisy.status.success(), "bad cap only warns");
    assert!(String::from_utf8_lossy(&noisy.stderr).contains("WLSTREES_THREADS"));
}

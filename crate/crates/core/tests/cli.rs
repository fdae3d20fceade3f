use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const TRIANGLE: &str = "\
[vertices]
count 3

[edges]
1 1 2 0 1
2 2 3 0 1
3 3 1 0 1

[initial]
x0 1 -2 1
";

const PATH: &str = "[vertices]\ncount 2\n[edges]\n1 1 2 0 1\n";

const INFEASIBLE: &str = "[vertices]\ncount 2\n[edges]\n1 1 2 1 2\n2 2 1 3 4\n";

/// A bidirectional edge and a source-sink pair; needs normalizing.
const DISTURBED: &str = "\
[vertices]
count 3

[edges]
1 1 2 -1 1
2 2 3 0 2
3 3 1 0 1

[terminals]
1 + 1/2
3 - 1/2

[initial]
x0 0 1 2
";

fn flownet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flownet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn arg(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn json(output: &Output) -> Value {
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

#[test]
fn check_ipc_exit_codes() {
    let dir = TempDir::new().unwrap();
    let triangle = write(&dir, "t.net", TRIANGLE);
    let out = flownet(&["check-ipc", arg(&triangle)]);
    assert_eq!(out.status.code(), Some(0));
    let report = json(&out);
    assert_eq!(report["status"], "holds");
    assert_eq!(report["witness"], serde_json::json!(["1/2", "1/2", "1/2"]));
    assert_eq!(report["provenance"]["input_sha256"].as_str().unwrap().len(), 64);

    let path = write(&dir, "p.net", PATH);
    let out = flownet(&["check-ipc", arg(&path)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["status"], "fails");

    let infeasible = write(&dir, "i.net", INFEASIBLE);
    let out = flownet(&["check-ipc", arg(&infeasible)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json(&out)["status"], "infeasible");
}

#[test]
fn check_ipc_normalizes_general_input() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "d.net", DISTURBED);
    let out = flownet(&["check-ipc", arg(&net)]);
    let report = json(&out);
    assert!(report["edge_map"].is_object());
    assert_eq!(report["edge_map"]["original_edge_count"], 3);
}

#[test]
fn simulate_writes_trajectory() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "t.net", TRIANGLE);
    let out_dir = dir.path().join("run");
    let out = flownet(&["--horizon", "40", "--out", arg(&out_dir), "simulate", arg(&net)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x_1,x_2,x_3,xc_1,xc_2,xc_3,V,sum_x,norm_BtgradH");
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last[0], 40.0);
    assert!(last[8].abs() < 1e-12);
    assert!(last[9] <= 1e-6);
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["mode"], "consensus");
}

#[test]
fn simulate_uses_disturbed_mode_with_terminals() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "d.net", DISTURBED);
    let out = flownet(&["--horizon", "5", "simulate", arg(&net)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["mode"], "disturbed");
}

#[test]
fn reports_are_reproducible() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "t.net", TRIANGLE);
    let a = flownet(&["--horizon", "10", "simulate", arg(&net)]);
    let b = flownet(&["--horizon", "10", "simulate", arg(&net)]);
    assert!(!a.stdout.is_empty());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn steer_reaches_target() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "t.net", TRIANGLE);
    let out = flownet(&["--horizon", "60", "steer", arg(&net), "--target", "1,-1,0"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["mode"], "steering");
    let x: Vec<f64> = report["final_state"]["x"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    for (xi, ti) in x.iter().zip([1.0, -1.0, 0.0]) {
        assert!((xi - ti).abs() < 1e-5, "{x:?}");
    }
}

#[test]
fn malformed_input_exits_with_error() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "b.net", "[vertices]\ncount 2\n[edges]\n1 1 2 zero 1\n");
    let out = flownet(&["check-ipc", arg(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let out = flownet(&["check-ipc", arg(&dir.path().join("missing.net"))]);
    assert_eq!(out.status.code(), Some(1));

    let out = flownet(&["no-such-command"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn normalize_writes_compatible_network() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "d.net", DISTURBED);
    let out_dir = dir.path().join("norm");
    let out = flownet(&["--out", arg(&out_dir), "normalize", arg(&net)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let normalized = dir.path().join("norm").join("normalized.net");
    let again = flownet(&["normalize", arg(&normalized)]);
    assert_eq!(json(&again)["identity"], true);
}

#[test]
fn counterexample_freezes_path() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "p.net", PATH);
    let out = flownet(&["counterexample", arg(&net)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["freeze"]["frozen"], true);
    assert!(report["freeze"]["min_disagreement"].as_f64().unwrap() > 0.0);

    let triangle = write(&dir, "t.net", TRIANGLE);
    assert_eq!(flownet(&["counterexample", arg(&triangle)]).status.code(), Some(1));
}

#[test]
fn circuits_decompose_flow() {
    let dir = TempDir::new().unwrap();
    let net = write(&dir, "t.net", TRIANGLE);
    let out = flownet(&["circuits", arg(&net), "--flow", "1/2,1/2,1/2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["circuits"], serde_json::json!([[1, 2, 3]]));
    assert_eq!(report["decomposition"][0]["alpha"], "1/2");
}

#[test]
fn small_sweep_has_no_mismatches() {
    let out = flownet(&["--seed", "7", "sweep", "--max-vertices", "3", "--max-edges", "3", "--max-bound", "2", "--random", "20"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert!(report["exhaustive"]["instances"].as_u64().unwrap() > 0);
    assert_eq!(report["exhaustive"]["mismatches"], 0);
    assert_eq!(report["random"]["mismatches"], 0);
    assert_eq!(report["provenance"]["seed"], 7);
}

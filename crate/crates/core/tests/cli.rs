use std::process::{Command, Output};

use serde_json::Value;

fn qgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgraph")).args(args).env_remove("QGRAPH_TOL").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn lemma21_json() {
    let out = qgraph(&["lemma21", "--n", "4"]);
    assert!(out.status.success());
    let v = json(&out);
    assert_eq!(v["command"], "lemma21");
    assert_eq!(v["passed"], true);
    assert_eq!(v["result"]["multiplicity2"], 3);
}

#[test]
fn rank_certificate_csv() {
    let out = qgraph(&["--format", "csv", "rank-cert", "--n", "5"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(rows.headers().unwrap().len(), 11);
    let records: Vec<_> = rows.records().map(|r| r.unwrap()).collect();
    // 15 F-vectors and the singular values
    assert_eq!(records.len(), 16);
    let sv: Vec<f64> = records[15].iter().skip(1).map(|c| c.parse().unwrap()).collect();
    assert_eq!(sv.iter().filter(|s| **s > 1e-10 * sv[0]).count(), 10);
    let v = json(&qgraph(&["rank-cert", "--n", "5"]));
    assert_eq!(v["result"]["rank"], 10);
}

#[test]
fn spectrum_of_a_graph_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g3.json");
    std::fs::write(&path, qgraph_core::graph::complete_pendant(3).unwrap().to_json().unwrap()).unwrap();
    let out = qgraph(&["spectrum", "--graph", path.to_str().unwrap(), "--lambda-max", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let text = v["result"].to_string();
    assert!(text.contains("multiplicity"), "{text}");
}

#[test]
fn malformed_graph_fails() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"vertices": [], "edges": [{"tail": 0, "head": 5, "length": 1.0}]}"#).unwrap();
    let out = qgraph(&["spectrum", "--graph", path.to_str().unwrap(), "--lambda-max", "5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid graph"));
    let out = qgraph(&["spectrum", "--graph", dir.path().join("missing.json").to_str().unwrap(), "--lambda-max", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_arguments_fail() {
    assert!(!qgraph(&["lemma21", "--n", "2"]).status.success());
    assert!(!qgraph(&["qdot", "--n", "3", "--direction", "sideways:1"]).status.success());
    assert!(!qgraph(&["nonsense"]).status.success());
}

#[test]
fn same_seed_same_bytes() {
    let args = ["--seed", "7", "critere", "--n", "3", "--direction", "interior:0,1", "--s", "1e-3"];
    let a = qgraph(&args);
    let b = qgraph(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn output_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let out = qgraph(&["--output", path.to_str().unwrap(), "cut-star", "--n", "5"]);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["command"], "cut-star");
}

#[test]
fn tolerance_override_from_flag_and_env() {
    let out = qgraph(&["--tol", "1e-30", "lemma21", "--n", "3"]);
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_qgraph"))
        .args(["lemma21", "--n", "3"])
        .env("QGRAPH_TOL", "1e-30")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("check failed"));
}

#[test]
fn prescribe_writes_graph() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tilde.json");
    let out = qgraph(&["prescribe-distinct", "--targets", "1,2,3", "--graph-out", path.to_str().unwrap()]);
    assert!(out.status.success());
    let g = qgraph_core::MetricGraph::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(g.components().len(), 3);
}

#[test]
fn robin_sweep_csv_columns() {
    let out = qgraph(&["--format", "csv", "robin-sweep", "--length", "pi", "--ladder", "10,100,1000", "--k", "3"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "rho,k,lambda_robin,lambda_dirichlet,gap,overlap,bound");
    assert_eq!(text.lines().count(), 10);
}

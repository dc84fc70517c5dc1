use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use edgeswitch::fixtures;
use serde_json::Value;

fn edgeswitch(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgeswitch"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn interval_spectrum_csv() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "interval.json", &fixtures::interval(1.0).to_json());
    let out = edgeswitch(dir.path(), &["spectrum", "--graph", &g, "--levels", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,k,E"));
    for (i, line) in lines.enumerate() {
        let k: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!((k - (i + 1) as f64 * std::f64::consts::PI).abs() < 1e-9);
    }
    let manifest = json_file(&dir.path().join("manifest.json"));
    assert_eq!(manifest["command"], "spectrum");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn malformed_graph_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "bad.json", "{\"vertices\": [], \"edges\": [{\"id\": 0}]");
    let out = edgeswitch(dir.path(), &["spectrum", "--graph", &g, "--levels", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid graph"));

    let neg = r#"{"vertices":[{"id":0,"bc":"kirchhoff"},{"id":1,"bc":"kirchhoff"}],
                 "edges":[{"id":0,"tail":0,"head":1,"length":-1.0}]}"#;
    let g = write(dir.path(), "neg.json", neg);
    let out = edgeswitch(dir.path(), &["spectrum", "--graph", &g, "--levels", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn tetrahedron_switch_report() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "tet.json", &fixtures::tetrahedron().to_json());
    let log = write(
        dir.path(),
        "switch.jsonl",
        "{\"kind\":\"switch\",\"p\":{\"edge\":0,\"end\":\"head\"},\"q\":{\"edge\":5,\"end\":\"head\"}}\n",
    );
    let out = edgeswitch(dir.path(), &["shift", "--graph", &g, "--transform", &log, "--levels", "400", "--samples", "2000", "--seed", "4"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_file(&dir.path().join("shift_report.json"));
    assert_eq!(report["interlacing_degree"], 1);
    assert_eq!(report["composed_bound"], 1);
    let csv = fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    assert!(csv.starts_with("dN,count\n"));
    let total: usize = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 2000);
}

#[test]
fn reruns_are_identical_apart_from_the_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "tet.json", &fixtures::tetrahedron().to_json());
    let log = write(dir.path(), "swap.jsonl", "{\"kind\":\"swap\",\"e\":0,\"f\":5}\n");
    let mut manifests = Vec::new();
    for (run, jobs) in [("a", "1"), ("b", "2")] {
        let out = dir.path().join(run);
        let o = edgeswitch(&out, &["--jobs", jobs, "shift", "--graph", &g, "--transform", &log, "--levels", "300", "--samples", "3000", "--seed", "9"]);
        assert!(o.status.success());
        let mut m = json_file(&out.join("manifest.json"));
        m["timestamp"] = Value::Null;
        m["args"] = Value::Null;
        manifests.push(m);
    }
    assert_eq!(manifests[0]["outputs"], manifests[1]["outputs"]);
    assert_eq!(
        fs::read(dir.path().join("a/histogram.csv")).unwrap(),
        fs::read(dir.path().join("b/histogram.csv")).unwrap()
    );
}

#[test]
fn transform_writes_primitive_steps() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "tet.json", &fixtures::tetrahedron().to_json());
    let log = write(dir.path(), "cross.jsonl", "{\"kind\":\"crossing\",\"e\":0,\"s_e\":0.5,\"f\":5,\"s_f\":1.0}\n");
    let out = edgeswitch(dir.path(), &["transform", "--graph", &g, "--transform", &log]);
    assert!(out.status.success());
    let steps = fs::read_to_string(dir.path().join("primitives.jsonl")).unwrap();
    assert_eq!(steps.lines().count(), 5);
    let transformed = edgeswitch::MetricGraph::from_json(&fs::read_to_string(dir.path().join("transformed.json")).unwrap()).unwrap();
    assert!((transformed.total_length() - fixtures::TETRAHEDRON_TOTAL_LENGTH).abs() < 1e-12);
}

#[test]
fn violated_limit_exits_with_property_code() {
    let dir = tempfile::tempdir().unwrap();
    let t = fixtures::tetrahedron();
    let mut edges = t.edges().to_vec();
    edges[0].alpha = 1.1;
    let g = edgeswitch::MetricGraph::new(t.vertices().to_vec(), edges).unwrap();
    let path = write(dir.path(), "flux.json", &g.to_json());
    let out = edgeswitch(dir.path(), &["crossing-limit", "--graph", &path, "--p", "0:head", "--q", "5:head", "--tol", "1e-9"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("PROPERTY VIOLATION"));
    assert!(dir.path().join("crossing_limit.json").exists());
}

#[test]
fn lemma_and_ensemble_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = edgeswitch(dir.path(), &["verify-lemmas", "--fixtures", "12", "--seed", "2"]);
    assert!(out.status.success());
    let summary: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["reflection_bound_violations"], 0);

    let topo = write(dir.path(), "lollipop.json", &fixtures::lollipop(&[1.0; 4]).to_json());
    let lengths = write(dir.path(), "lengths.json", "[1.0, 1.3, 1.7, 2.2]");
    let out = edgeswitch(dir.path(), &["ensemble", "walk", "--topology", &topo, "--lengths", &lengths, "--steps", "50", "--levels", "5"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 52);
    assert!(dir.path().join("spectra.csv").exists());

    let out = edgeswitch(dir.path(), &["ensemble", "pairs", "--topology", &topo, "--lengths", &lengths, "--pairs", "6", "--levels", "60"]);
    assert!(out.status.success());
    let bad = write(dir.path(), "short.json", "[1.0, 2.0]");
    let out = edgeswitch(dir.path(), &["ensemble", "walk", "--topology", &topo, "--lengths", &bad, "--steps", "5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn discrete_commands() {
    let dir = tempfile::tempdir().unwrap();
    let path = r#"{"n":3,"couplings":[[0,1,1.0,0.0],[1,2,1.0,0.0]],"potential":[0,0,0]}"#;
    let g = write(dir.path(), "path.json", path);
    let out = edgeswitch(dir.path(), &["dspectrum", "--graph", &g]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("dspectrum.csv")).unwrap();
    let e: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    let s = 2f64.sqrt();
    for (x, y) in e.iter().zip([-s, 0.0, s]) {
        assert!((x - y).abs() < 1e-12);
    }
    let out = edgeswitch(dir.path(), &["dswitch", "--random", "4", "--energies", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use active_scan::eval::{ari, monte_carlo_roc};
use active_scan::generators::paper_params;
use active_scan::locality::psi_k_all;
use active_scan::spectral::ClusterAssignment;
use active_scan::Graph;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_active-scan"))
        .args(args)
        .env_remove("ACTIVE_SCAN_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("stderr is an error JSON")
}

fn write_edges(dir: &Path, name: &str, edges: &[(u32, u32)]) -> String {
    let path = dir.join(name);
    let text: String = edges.iter().map(|(a, b)| format!("{a} {b}\n")).collect();
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 6-clique on 0..6 plus a 40-leaf star centred on 6.
fn star_and_clique() -> Vec<(u32, u32)> {
    let mut e = Vec::new();
    for a in 0..6 {
        for b in 0..6 {
            if a != b {
                e.push((a, b));
            }
        }
    }
    e.extend((7..47).map(|l| (6, l)));
    e
}

#[test]
fn detect_on_three_cycle() {
    let dir = TempDir::new().unwrap();
    let input = write_edges(dir.path(), "c3.txt", &[(0, 1), (1, 2), (2, 0)]);
    let out = dir.path().join("out");
    ok(&[
        "detect",
        "--input",
        &input,
        "--Q",
        "3",
        "--out",
        p(&out),
        "--write-similarity",
    ]);
    let clusters =
        ClusterAssignment::read_csv(fs::read_to_string(out.join("clusters.csv")).unwrap().as_bytes()).unwrap();
    assert_eq!(clusters.vertices.len(), 3);
    let diag: Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["spectral"]["floor_applied"], Value::Bool(true));
    assert_eq!(diag["q_used"], 3);
    assert_eq!(fs::read_to_string(out.join("mds.csv")).unwrap().lines().count(), 4);
    assert_eq!(
        fs::read_to_string(out.join("topq.csv")).unwrap().lines().next(),
        Some("vertex,psi")
    );
    assert!(out.join("similarity.csv").exists());
}

#[test]
fn detect_missing_input_names_the_path() {
    let out = run(&["detect", "--input", "/definitely/not/here.txt"]);
    let err = error_json(&out);
    assert_eq!(err["error"]["kind"], "io");
    assert!(err["error"]["message"]
        .as_str()
        .unwrap()
        .contains("/definitely/not/here.txt"));
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"Q": 2, "k": 0, "seed": 5}"#).unwrap();
    let dumped: Value =
        serde_json::from_str(&ok(&["detect", "--config", p(&cfg), "--Q", "7", "--dump-config"])).unwrap();
    assert_eq!(dumped["Q"], 7);
    assert_eq!(dumped["k"], 0);
    assert_eq!(dumped["seed"], 5);
    assert_eq!(dumped["max_clusters"], 8);
    fs::write(&cfg, r#"{"Q": 2, "nonsense": true}"#).unwrap();
    let err = error_json(&run(&["detect", "--config", p(&cfg), "--dump-config"]));
    assert_eq!(err["error"]["kind"], "format");
}

#[test]
fn detect_recovers_sbm_blocks_with_known_count() {
    let dir = TempDir::new().unwrap();
    let sbm = dir.path().join("sbm");
    ok(&["sbm", "--paper", "--seed", "4", "--out", p(&sbm)]);
    let out = dir.path().join("det");
    ok(&[
        "detect",
        "--input",
        p(&sbm.join("graph.txt")),
        "--Q",
        "60",
        "--clusters",
        "4",
        "--out",
        p(&out),
    ]);
    let labels: Vec<usize> = fs::read_to_string(sbm.join("labels.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    let clusters =
        ClusterAssignment::read_csv(fs::read_to_string(out.join("clusters.csv")).unwrap().as_bytes()).unwrap();
    let truth: Vec<usize> = clusters.vertices.iter().map(|v| labels[v.index()]).collect();
    let score = ari(&truth, &clusters.labels).unwrap();
    assert!(score > 0.7, "ARI {score}");
}

#[test]
fn topq_counts_and_determinism() {
    let dir = TempDir::new().unwrap();
    // 100-vertex ring with chords
    let edges: Vec<(u32, u32)> = (0..100u32)
        .flat_map(|i| [(i, (i + 1) % 100), (i, (i * 7 + 3) % 100)])
        .collect();
    let ring = write_edges(dir.path(), "ring.txt", &edges);
    let full: Value = serde_json::from_str(&ok(&[
        "topq",
        "--input",
        &ring,
        "--Q",
        "100",
        "--workers",
        "1",
        "--format",
        "json",
    ]))
    .unwrap();
    assert_eq!(full["computed_count"], 100);

    let sc = write_edges(dir.path(), "sc.txt", &star_and_clique());
    let args = [
        "topq",
        "--input",
        sc.as_str(),
        "--Q",
        "1",
        "--workers",
        "1",
        "--format",
        "json",
    ];
    let a: Value = serde_json::from_str(&ok(&args)).unwrap();
    let b: Value = serde_json::from_str(&ok(&args)).unwrap();
    let n = 47;
    assert!(a["computed_count"].as_u64().unwrap() < n);
    let g = Graph::from_edges(n as usize, star_and_clique()).unwrap();
    let best = psi_k_all(&g, 1).into_iter().max().unwrap();
    assert_eq!(a["entries"][0][1].as_u64().unwrap(), best);
    for key in ["entries", "computed_count", "est1_count", "est2_count", "passes"] {
        assert_eq!(a[key], b[key], "{key}");
    }
    let csv = ok(&["topq", "--input", &sc, "--Q", "1", "--workers", "1"]);
    assert!(csv.starts_with("vertex,psi\n"));
}

#[test]
fn sbm_files_are_calibrated_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["sbm", "--paper", "--seed", "11", "--out", p(&a)]);
    ok(&["sbm", "--paper", "--seed", "11", "--out", p(&b)]);
    for f in ["graph.txt", "labels.csv", "params.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (g, _) = Graph::load_edge_list(fs::read_to_string(a.join("graph.txt")).unwrap().as_bytes()).unwrap();
    assert_eq!(g.num_vertices(), 1000);
    let (mean, var) = paper_params().edge_count_moments();
    let m = g.num_edges() as f64;
    assert!((m - mean).abs() < 5.0 * var.sqrt(), "m = {m}");

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{not json").unwrap();
    let err = error_json(&run(&["sbm", "--params", p(&bad), "--out", p(&dir.path().join("c"))]));
    assert_eq!(err["error"]["kind"], "format");
}

#[test]
fn sbm_accepts_custom_params() {
    let dir = TempDir::new().unwrap();
    let params = dir.path().join("p.json");
    fs::write(&params, r#"{"block_sizes": [3, 2], "p": [[1.0, 0.0], [0.0, 1.0]]}"#).unwrap();
    let out = dir.path().join("o");
    ok(&["sbm", "--params", p(&params), "--out", p(&out)]);
    let (g, _) = Graph::load_edge_list(fs::read_to_string(out.join("graph.txt")).unwrap().as_bytes()).unwrap();
    assert_eq!(g.num_edges(), 6 + 2);
}

#[test]
fn eval_roc_matches_library() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("roc");
    ok(&[
        "eval",
        "roc",
        "--paper",
        "--runs",
        "1",
        "--k",
        "1",
        "--seed",
        "21",
        "--out",
        p(&out),
    ]);
    let lib = monte_carlo_roc(&paper_params(), 1, 1, 21).unwrap();
    assert_eq!(fs::read_to_string(out.join("roc_curve.csv")).unwrap(), lib.curve_csv());
    assert_eq!(fs::read_to_string(out.join("roc_runs.csv")).unwrap(), lib.runs_csv());
}

#[test]
fn eval_ari_table_and_errors() {
    let table = ok(&[
        "eval",
        "ari",
        "--paper",
        "--runs",
        "1",
        "--q-values",
        "61..200:50",
        "--seed",
        "2",
    ]);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "Q,mean_ari,sd_ari");
    assert_eq!(lines.len(), 1 + 3);
    let json: Value = serde_json::from_str(&ok(&[
        "eval",
        "ari",
        "--paper",
        "--runs",
        "2",
        "--q-values",
        "70",
        "--clusters",
        "blocks",
        "--format",
        "json",
    ]))
    .unwrap();
    assert_eq!(json["runs"].as_array().unwrap().len(), 2);
    assert_eq!(json["runs"][0]["clusters"], 4);
    let err = error_json(&run(&["eval", "roc", "--paper", "--runs", "0"]));
    assert_eq!(err["error"]["kind"], "invalid_argument");
}

#[test]
fn bench_trim_rows() {
    let dir = TempDir::new().unwrap();
    let sc = write_edges(dir.path(), "sc.txt", &star_and_clique());
    let csv = ok(&["bench-trim", "--input", &sc, "--q-values", "1,5,47", "--workers", "1"]);
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2][0], "47");
    assert_eq!(rows[2][2], "47");
    let err = error_json(&run(&["bench-trim", "--input", &sc, "--q-values", ""]));
    assert_eq!(err["error"]["kind"], "invalid_argument");
    let err = error_json(&run(&["bench-trim", "--input", &sc, "--q-values", "5,1"]));
    assert_eq!(err["error"]["kind"], "invalid_argument");
}

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn rknn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rknn")).args(args).output().expect("spawn rknn")
}

fn ok(args: &[&str]) -> String {
    let out = rknn(args);
    assert!(
        out.status.success(),
        "rknn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three vertices on a line, 10 apart, with both arc directions listed.
fn write_path(dir: &Path) -> (String, String) {
    let gr = dir.join("path.gr");
    let co = dir.join("path.co");
    fs::write(&gr, "c path\np sp 3 4\na 1 2 10\na 2 1 10\na 2 3 10\na 3 2 10\n").unwrap();
    fs::write(&co, "p aux sp co 3\nv 1 0 0\nv 2 10 0\nv 3 20 0\n").unwrap();
    (s(&gr).to_string(), s(&co).to_string())
}

fn write_path_workload(dir: &Path) -> (String, String, String) {
    let o = dir.join("objects.txt");
    let q = dir.join("queries.txt");
    let f = dir.join("facilities.txt");
    fs::write(&o, "objects 1\no 0 1 2 3\n").unwrap();
    fs::write(&q, "queries 2 k=1\nq 1\nq 3\n").unwrap();
    fs::write(&f, "facilities 2\nf 1\nf 3\n").unwrap();
    (s(&o).to_string(), s(&q).to_string(), s(&f).to_string())
}

#[test]
fn load_reports_counts_and_round_trips_snapshot() {
    let dir = TempDir::new().unwrap();
    let (gr, co) = write_path(dir.path());
    let text = ok(&["load", "--gr", &gr, "--co", &co]);
    assert!(text.contains("vertices 3"), "{text}");
    assert!(text.contains("edges 2 (undirected; 4 DIMACS arcs)"), "{text}");
    assert!(text.contains("metric ok"), "{text}");

    let snap = dir.path().join("net.bin");
    let json = ok(&["load", "--gr", &gr, "--co", &co, "--json", "--out", s(&snap)]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["vertices"], 3);
    assert_eq!(v["edges"], 2);
    assert_eq!(v["metric_ok"], true);

    let again = ok(&["load", "--snapshot", s(&snap), "--json"]);
    let w: serde_json::Value = serde_json::from_str(&again).unwrap();
    assert_eq!(w["edges"], 2);
    assert_eq!(w["coord_scale"], v["coord_scale"]);
}

#[test]
fn bad_input_exits_nonzero() {
    let dir = TempDir::new().unwrap();
    let gr = dir.path().join("bad.gr");
    let co = dir.path().join("bad.co");
    fs::write(&gr, "p sp 2 1\na 1 x 3\n").unwrap();
    fs::write(&co, "v 1 0 0\nv 2 1 0\n").unwrap();
    let out = rknn(&["load", "--gr", s(&gr), "--co", s(&co)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    assert!(!rknn(&["load"]).status.success());
    assert!(!rknn(&["load", "--gr", s(&gr), "--co", s(&dir.path().join("missing.co"))]).status.success());
}

#[test]
fn generate_uses_defaults_and_seed() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    ok(&["generate", "--grid", "12x12", "--num-objects", "50", "--out", s(&a)]);
    ok(&["generate", "--grid", "12x12", "--num-objects", "50", "--out", s(&b)]);
    ok(&["generate", "--grid", "12x12", "--num-objects", "50", "--seed", "9", "--out", s(&c)]);
    let qa = fs::read_to_string(a.join("queries.txt")).unwrap();
    assert!(qa.starts_with("queries 100 k=10\n"), "{qa}");
    let oa = fs::read_to_string(a.join("objects.txt")).unwrap();
    assert!(oa.starts_with("objects 50\n"));
    assert_eq!(oa, fs::read_to_string(b.join("objects.txt")).unwrap());
    assert_eq!(qa, fs::read_to_string(b.join("queries.txt")).unwrap());
    assert_ne!(oa, fs::read_to_string(c.join("objects.txt")).unwrap());
    assert!(!a.join("facilities.txt").exists());

    let z = dir.path().join("z");
    ok(&[
        "generate", "--grid", "4x4", "--num-objects", "0", "--batch-size", "3", "--facility-fraction", "0.5",
        "--out", s(&z),
    ]);
    assert_eq!(fs::read_to_string(z.join("objects.txt")).unwrap(), "objects 0\n");
    assert!(fs::read_to_string(z.join("facilities.txt")).unwrap().starts_with("facilities 8\n"));
}

#[test]
fn query_and_oracle_agree_on_path() {
    let dir = TempDir::new().unwrap();
    let (gr, co) = write_path(dir.path());
    let (o, q, f) = write_path_workload(dir.path());
    let base = ["--gr", &gr, "--co", &co, "--objects", &o, "--queries", &q, "--facilities", &f];

    let results = dir.path().join("results.txt");
    let mut args = vec!["query"];
    args.extend(base);
    args.extend(["--out", s(&results)]);
    ok(&args);
    assert_eq!(fs::read_to_string(&results).unwrap(), "r 1 0\nr 3\n");

    let mut args = vec!["oracle"];
    args.extend(base);
    let text = ok(&args);
    let rows: Vec<_> = text.lines().filter(|l| !l.starts_with("c ")).collect();
    assert_eq!(rows, ["r 1 0", "r 3"]);

    let mut args = vec!["query", "--json", "--no-cache"];
    args.extend(base);
    let v: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(v["config"]["cache_enabled"], false);
    assert_eq!(v["result_sizes"], serde_json::json!([1, 0]));
}

#[test]
fn empty_query_list_gives_empty_results() {
    let dir = TempDir::new().unwrap();
    let (gr, co) = write_path(dir.path());
    let (o, _, _) = write_path_workload(dir.path());
    let q = dir.path().join("none.txt");
    fs::write(&q, "queries 0 k=2\n").unwrap();
    let text = ok(&["query", "--gr", &gr, "--co", &co, "--objects", &o, "--queries", s(&q)]);
    assert!(text.lines().all(|l| l.starts_with("c ")), "{text}");
}

#[test]
fn query_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let w = dir.path().join("w");
    ok(&["generate", "--grid", "15x15", "--num-objects", "300", "--batch-size", "20", "--k", "3", "--out", s(&w)]);
    let (o, q) = (w.join("objects.txt"), w.join("queries.txt"));
    let run = |name: &str, extra: &[&str]| {
        let path = dir.path().join(name);
        let mut args = vec!["query", "--grid", "15x15", "--objects", s(&o), "--queries", s(&q), "--out", s(&path)];
        args.extend(extra);
        ok(&args);
        fs::read_to_string(path).unwrap()
    };
    let first = run("r1", &[]);
    assert_eq!(first.lines().count(), 20);
    assert_eq!(first, run("r2", &[]));
    assert_eq!(first, run("r3", &["--parallel"]));
    assert_eq!(first, run("r4", &["--rtree-mode", "mbr", "--no-quick-verify"]));

    let oracle = dir.path().join("oracle");
    ok(&["oracle", "--grid", "15x15", "--objects", s(&o), "--queries", s(&q), "--out", s(&oracle)]);
    assert_eq!(first, fs::read_to_string(oracle).unwrap());
}

#[test]
fn ablate_variants_agree() {
    let dir = TempDir::new().unwrap();
    let w = dir.path().join("w");
    ok(&["generate", "--grid", "20x20", "--num-objects", "800", "--batch-size", "40", "--k", "4", "--out", s(&w)]);
    let (o, q) = (w.join("objects.txt"), w.join("queries.txt"));
    let text = ok(&["ablate", "--grid", "20x20", "--objects", s(&o), "--queries", s(&q)]);
    assert!(text.contains("identical"), "{text}");
    let json = ok(&["ablate", "--grid", "20x20", "--objects", s(&o), "--queries", s(&q), "--json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let names: Vec<_> = v.as_array().unwrap().iter().map(|r| r["variant"].as_str().unwrap().to_string()).collect();
    assert_eq!(names, ["Full", "NoCache", "w/o QV", "MBR"]);
    let sssp = |i: usize| v[i]["counters"]["sssp_runs"].as_u64().unwrap();
    assert!(sssp(0) <= sssp(1));
    assert!(sssp(0) <= sssp(2));
}

#[test]
fn sweep_emits_fixed_columns() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("sweep.csv");
    ok(&[
        "sweep", "--grid", "12x12", "--num-objects", "200", "--axis", "batch-size", "--values", "10,20,40", "--out",
        s(&csv),
    ]);
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(
        lines[0],
        "axis,value,wall_time_s,sssp_runs,cache_hits,cache_hit_rate,quick_verify_hits,full_verifications,\
rtree_nodes_visited,vertices_settled,prune_probes,total_results"
    );
    assert!(lines[1].starts_with("batch_size,10,"));
    assert!(lines.iter().all(|l| l.split(',').count() == 12));

    let objects = ok(&["sweep", "--grid", "12x12", "--axis", "num-objects", "--values", "0,100", "--batch-size", "5"]);
    assert!(objects.lines().nth(2).unwrap().starts_with("num_objects,100,"));
}

#[test]
fn k_sweep_is_monotone_per_query() {
    let json = ok(&[
        "sweep", "--grid", "12x12", "--num-objects", "300", "--batch-size", "10", "--axis", "k", "--values", "1,10,100",
        "--json",
    ]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let sizes: Vec<Vec<u64>> = v
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["result_sizes"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect())
        .collect();
    assert_eq!(sizes.len(), 3);
    for w in sizes.windows(2) {
        assert!(w[0].iter().zip(&w[1]).all(|(a, b)| a <= b), "{sizes:?}");
    }
}

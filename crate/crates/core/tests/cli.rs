use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use maskcp::io::ResultDocument;
use maskcp::eval::CpScore;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn maskcp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maskcp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = maskcp(args);
    assert!(
        out.status.success(),
        "maskcp {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, name: &str, n: usize, seed: u64) -> (PathBuf, PathBuf) {
    let edges = path(dir, name);
    let truth = path(dir, &format!("{name}.truth"));
    ok(&[
        "generate", "--pairs", "2", "--n", &n.to_string(), "--seed", &seed.to_string(),
        "--output", s(&edges), "--ground-truth", s(&truth),
    ]);
    (edges, truth)
}

fn eval(result: &Path, truth: &Path) -> Result<CpScore, String> {
    let out = maskcp(&["eval", "--input", s(result), "--ground-truth", s(truth)]);
    if out.status.success() {
        Ok(serde_json::from_slice(&out.stdout).unwrap())
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

/// Rewrites a result document with every node's pair and core flag taken from `labels`.
fn relabel(doc: &mut ResultDocument, labels: &[(usize, bool)]) {
    for (node, &(pair, core)) in doc.nodes.iter_mut().zip(labels) {
        node.pair = pair;
        node.core = core;
    }
}

fn truth_labels(truth: &Path) -> Vec<(String, usize, bool)> {
    fs::read_to_string(truth)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].to_owned(), f[1].parse().unwrap(), f[2] == "1")
        })
        .collect()
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, ta) = generate(dir.path(), "a.txt", 200, 7);
    let (b, tb) = generate(dir.path(), "b.txt", 200, 7);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read(&ta).unwrap(), fs::read(&tb).unwrap());
    let (c, _) = generate(dir.path(), "c.txt", 200, 8);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn generate_rejects_full_core_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = path(dir.path(), "g.txt");
    let out = maskcp(&["generate", "--core-fraction", "1.0", "--output", s(&out_path)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert!(!out_path.exists());
}

#[test]
fn detect_with_one_pair_labels_everything_zero() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, _) = generate(dir.path(), "g.txt", 60, 1);
    let result = path(dir.path(), "r.json");
    ok(&["detect", "--input", s(&edges), "--output", s(&result), "--k", "1", "--iters", "20"]);
    let doc = ResultDocument::load(&result).unwrap();
    assert_eq!(doc.active_pairs, vec![0]);
    assert!(doc.nodes.iter().all(|n| n.pair == 0));
}

#[test]
fn detect_rejects_zero_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, _) = generate(dir.path(), "g.txt", 40, 1);
    let result = path(dir.path(), "r.json");
    let out = maskcp(&["detect", "--input", s(&edges), "--output", s(&result), "--iters", "0"]);
    assert!(!out.status.success());
    assert!(!result.exists());
}

#[test]
fn detect_finds_two_planted_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, truth) = generate(dir.path(), "g.txt", 200, 3);
    let result = path(dir.path(), "r.json");
    let reorder = path(dir.path(), "reordered.csv");
    let factors = path(dir.path(), "factors");
    ok(&[
        "detect", "--input", s(&edges), "--output", s(&result), "--seed", "3",
        "--prune-threshold", "0.3", "--reorder", s(&reorder), "--dump-factors", s(&factors),
    ]);
    let doc = ResultDocument::load(&result).unwrap();
    assert_eq!(doc.active_pairs.len(), 2);
    assert_eq!(doc.nodes.len(), 200);
    assert!(doc.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12));

    let score = eval(&result, &truth).unwrap();
    assert!(score.nmi_pairs > 0.9, "{score:?}");

    let csv = fs::read_to_string(&reorder).unwrap();
    assert_eq!(csv.lines().count(), 201);
    let pairs: Vec<usize> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(pairs.windows(2).filter(|w| w[0] != w[1]).count() == 1, "pairs must be contiguous");
    for name in ["W.csv", "H.csv", "M.csv"] {
        let text = fs::read_to_string(factors.join(name)).unwrap();
        assert_eq!(text.lines().count(), 201, "{name}");
    }
}

#[test]
fn detect_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, _) = generate(dir.path(), "g.txt", 80, 2);
    let a = path(dir.path(), "a.json");
    let b = path(dir.path(), "b.json");
    for out in [&a, &b] {
        ok(&["detect", "--input", s(&edges), "--output", s(out), "--k", "6", "--iters", "40", "--seed", "5"]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn eval_perfect_shuffled_and_mismatched() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, truth) = generate(dir.path(), "g.txt", 600, 4);
    let result = path(dir.path(), "r.json");
    ok(&["detect", "--input", s(&edges), "--output", s(&result), "--k", "2", "--iters", "1"]);
    let mut doc = ResultDocument::load(&result).unwrap();

    let labels = truth_labels(&truth);
    let by_id: std::collections::HashMap<&str, (usize, bool)> =
        labels.iter().map(|(id, p, c)| (id.as_str(), (*p, *c))).collect();
    let aligned: Vec<(usize, bool)> = doc.nodes.iter().map(|n| by_id[n.id.as_str()]).collect();

    relabel(&mut doc, &aligned);
    fs::write(&result, doc.to_json().unwrap()).unwrap();
    let perfect = eval(&result, &truth).unwrap();
    assert!((perfect.nmi_cp - 1.0).abs() < 1e-12, "{perfect:?}");

    let mut shuffled = aligned.clone();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(0));
    relabel(&mut doc, &shuffled);
    fs::write(&result, doc.to_json().unwrap()).unwrap();
    let random = eval(&result, &truth).unwrap();
    assert!(random.nmi_cp < 0.1, "{random:?}");

    doc.nodes[0].id = "stranger".into();
    fs::write(&result, doc.to_json().unwrap()).unwrap();
    assert!(eval(&result, &truth).is_err());
}

#[test]
fn eval_writes_metric_file() {
    let dir = tempfile::tempdir().unwrap();
    let (edges, truth) = generate(dir.path(), "g.txt", 40, 9);
    let result = path(dir.path(), "r.json");
    let metrics = path(dir.path(), "m.json");
    ok(&["detect", "--input", s(&edges), "--output", s(&result), "--k", "4", "--iters", "10"]);
    let stdout = ok(&["eval", "--input", s(&result), "--ground-truth", s(&truth), "--output", s(&metrics)]);
    assert!(stdout.is_empty());
    let score: CpScore = serde_json::from_str(&fs::read_to_string(&metrics).unwrap()).unwrap();
    assert!((0.0..=1.0).contains(&score.nmi_cp));
}

#[test]
fn benchmark_counts_rows() {
    let csv = ok(&["benchmark", "--sizes", "40,60", "--seeds", "1..3", "--k", "4", "--iters", "5"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines[0].starts_with("N,seed,nmi_cp,seconds_per_iter,total_seconds"));
    assert_eq!(lines.len(), 1 + 6 + 2);
    assert_eq!(lines.iter().filter(|l| l.split(',').nth(1) == Some("mean")).count(), 2);
    for line in &lines[1..] {
        let nmi: f64 = line.split(',').nth(2).unwrap().parse().unwrap();
        assert!((0.0..=1.0).contains(&nmi));
    }
}

#[test]
fn overlap_ground_truth_lists_second_membership() {
    let dir = tempfile::tempdir().unwrap();
    let edges = path(dir.path(), "o.txt");
    ok(&["generate", "--pair-sizes", "30,30", "--overlap", "5", "--output", s(&edges)]);
    let text = fs::read_to_string(dir.path().join("o.txt.truth")).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("# also")).count(), 5);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 55);
}

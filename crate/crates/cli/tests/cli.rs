use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn anchors(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anchors")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

struct WExample {
    dir: TempDir,
}

impl WExample {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("corpus.txt"), "w1 w2\nw1 w1\nw2\nw1 w1 w2\n").unwrap();
        std::fs::write(
            dir.path().join("v.json"),
            r#"{"words":["w1","w2"],"idf":[1.0,1.0],"corpus_size":1}"#,
        )
        .unwrap();
        std::fs::write(dir.path().join("m.json"), r#"{"lambda":[1.0,-1.0],"lambda0":0.0}"#).unwrap();
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).to_str().unwrap().to_owned()
    }
}

#[test]
fn explain_w_example_exact() {
    let w = WExample::new();
    let out = anchors(&[
        "explain",
        "--model",
        &w.arg("m.json"),
        "--vectorizer",
        &w.arg("v.json"),
        "--doc",
        "w1 w1 w2",
        "--eval",
        "exact",
        "--corpus",
        &w.arg("corpus.txt"),
        "--out",
        &w.arg("result.json"),
        "--csv",
        &w.arg("table.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.starts_with("# anchors {\"explain\":"));
    assert!(text.contains("anchor: {w1 x2}\n"));
    assert!(text.contains("length: 2\n"));
    assert!(text.contains("precision: 1\n"));
    assert!(text.contains("coverage: 0.5\n"));

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(w.path("result.json")).unwrap()).unwrap();
    assert_eq!(json["anchor_words"], serde_json::json!(["w1"]));
    assert_eq!(json["result"]["chosen"], serde_json::json!([2, 0]));
    assert_eq!(json["result"]["p_value"], 1.0);
    assert_eq!(json["coverage"], 0.5);
    assert_eq!(json["anchor_positions"], serde_json::json!([0, 1]));

    let csv = std::fs::read_to_string(w.path("table.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(2).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.contains(&"\"{w1}\",1,0.75,0,14.3"));
    assert!(rows.contains(&"\"{w1 x2}\",2,1,0,"));
}

#[test]
fn explain_surrogate_matches_json() {
    let w = WExample::new();
    let out = anchors(&[
        "explain",
        "--model",
        &w.arg("m.json"),
        "--vectorizer",
        &w.arg("v.json"),
        "--doc",
        "w1 w1 w2",
        "--eval",
        "approx",
        "--out",
        &w.arg("r.json"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(w.path("r.json")).unwrap()).unwrap();
    let p = json["result"]["p_value"].as_f64().unwrap();
    assert!(stdout(&out).contains(&format!("precision: {p}\n")));
    assert!(stdout(&out).contains("coverage: n/a"));
    assert_eq!(json["result"]["chosen"], serde_json::json!([2, 0]));
}

#[test]
fn missing_model_is_input_error_without_artifacts() {
    let w = WExample::new();
    let out = anchors(&[
        "explain",
        "--model",
        &w.arg("absent.json"),
        "--vectorizer",
        &w.arg("v.json"),
        "--doc",
        "w1",
        "--out",
        &w.arg("r.json"),
        "--csv",
        &w.arg("t.csv"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--model"));
    assert!(!w.path("r.json").exists());
    assert!(!w.path("t.csv").exists());
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(anchors(&["explain", "--bogus"]).status.code(), Some(1));
    assert_eq!(anchors(&[]).status.code(), Some(1));
    assert_eq!(anchors(&["--help"]).status.code(), Some(0));
    assert_eq!(anchors(&["--version"]).status.code(), Some(0));
    let w = WExample::new();
    let bad_eps = anchors(&[
        "explain",
        "--model",
        &w.arg("m.json"),
        "--vectorizer",
        &w.arg("v.json"),
        "--doc",
        "w1",
        "--epsilon",
        "1.5",
    ]);
    assert_eq!(bad_eps.status.code(), Some(1));
}

#[test]
fn verify_prop1_reports_all_holding() {
    let out = anchors(&["verify", "prop1", "--trials", "60", "--seed", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("60/60 hold"));
    assert!(text.trim_end().ends_with("PASS"));
    assert_eq!(text.lines().filter(|l| l.starts_with(char::is_numeric)).count(), 61);
}

#[test]
fn verify_prop2_failure_exits_two() {
    // seed 1 has violations within its first 80 instances
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("p2.csv");
    let out = anchors(&["verify", "prop2", "--trials", "80", "--seed", "1", "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).trim_end().ends_with("FAIL"));
    let table = std::fs::read_to_string(csv).unwrap();
    assert!(table.lines().any(|l| l.ends_with("false,false") || l.contains(",false,")));
}

#[test]
fn sample_renders_unk_and_keeps_anchor() {
    let out = anchors(&["sample", "--doc", "a b c d", "--keep", "0,2", "--n", "200", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(lines.len(), 200);
    for l in &lines {
        let t: Vec<&str> = l.split(' ').collect();
        assert_eq!(t.len(), 4);
        assert_eq!((t[0], t[2]), ("a", "c"));
        assert!(t[1] == "b" || t[1] == "UNK");
    }
    assert!(lines.iter().any(|l| l.contains("UNK")));
    assert_eq!(anchors(&["sample", "--doc", "a b", "--keep", "7"]).status.code(), Some(1));
}

fn write_training_set(dir: &Path) {
    let out = anchors(&[
        "synth",
        "--documents",
        "150",
        "--seed",
        "4",
        "--corpus",
        dir.join("c.txt").to_str().unwrap(),
        "--labels",
        dir.join("l.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn fit_train_explain_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let s = |n: &str| d.join(n).to_str().unwrap().to_owned();
    write_training_set(d);
    assert_eq!(anchors(&["fit-vectorizer", "--corpus", &s("c.txt"), "--out", &s("v.json")]).status.code(), Some(0));
    let out = anchors(&[
        "train",
        "--corpus",
        &s("c.txt"),
        "--labels",
        &s("l.txt"),
        "--vectorizer",
        &s("v.json"),
        "--out",
        &s("m.json"),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("training accuracy: "));
    let out = anchors(&[
        "explain",
        "--model",
        &s("m.json"),
        "--vectorizer",
        &s("v.json"),
        "--doc",
        "great tasty food",
        "--eval",
        "empirical",
        "--n",
        "5000",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("prediction: 1"));
}

#[test]
fn train_accepts_tab_separated_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("t.txt"), "1\tgood good\n0\tbad\n1\tgood\n0\tbad bad\n").unwrap();
    std::fs::write(d.join("docs.txt"), "good good\nbad\ngood\nbad bad\n").unwrap();
    let s = |n: &str| d.join(n).to_str().unwrap().to_owned();
    assert_eq!(anchors(&["fit-vectorizer", "--corpus", &s("docs.txt"), "--out", &s("v.json")]).status.code(), Some(0));
    let out = anchors(&["train", "--corpus", &s("t.txt"), "--vectorizer", &s("v.json"), "--out", &s("m.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "training accuracy: 4/4\n");
}

#[test]
fn mismatched_labels_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.txt"), "a\nb\n").unwrap();
    std::fs::write(d.join("l.txt"), "1\n").unwrap();
    let out = anchors(&[
        "benchmark",
        "jaccard",
        "--corpus",
        d.join("c.txt").to_str().unwrap(),
        "--labels",
        d.join("l.txt").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--labels"));
}

#[test]
fn benchmark_jaccard_surrogate_table() {
    let dir = tempfile::tempdir().unwrap();
    write_training_set(dir.path());
    let out = anchors(&[
        "benchmark",
        "jaccard",
        "--corpus",
        dir.path().join("c.txt").to_str().unwrap(),
        "--labels",
        dir.path().join("l.txt").to_str().unwrap(),
        "--reps",
        "1",
        "--eval",
        "approx",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with("full") || l.starts_with("pr<")).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("full,"));
}

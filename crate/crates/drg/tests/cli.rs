use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn drg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drg"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = drg(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Background words with one attribute word per sentence.
fn planted_lines(markers: &[&str], n: usize, offset: usize) -> String {
    let background = ["the", "food", "staff", "room", "was", "and", "our", "view", "price", "it"];
    let mut out = String::new();
    for i in 0..n {
        let k = i + offset;
        let mut words: Vec<&str> = (0..5).map(|j| background[(k * 7 + j * 3 + k * j) % background.len()]).collect();
        words.insert(k % 6, markers[k % markers.len()]);
        out.push_str(&words.join(" "));
        out.push('\n');
    }
    out
}

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        let neg = planted_lines(&["awful", "rude", "dirty"], 60, 0);
        let pos = planted_lines(&["great", "friendly", "clean"], 60, 1);
        fs::write(dir.path().join("neg.txt"), neg).unwrap();
        fs::write(dir.path().join("pos.txt"), pos).unwrap();
        let config = r#"seed = 4
attributes = ["neg", "pos"]

[data.train]
neg = "neg.txt"
pos = "pos.txt"

[salience]
gamma = 5.0

[generator]
embedding_dim = 6
hidden_dim = 8
max_epochs = 1
batch_size = 8
vocab_min_count = 1

[language_model]
embedding_dim = 6
hidden_dim = 8
max_epochs = 1
batch_size = 8
vocab_min_count = 1

[classifier]
embedding_dim = 8
hidden_dim = 8
max_epochs = 15
batch_size = 8
vocab_min_count = 1

[system]
kind = "template"
beam = 2
k = 3
"#;
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Workspace { dir }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    fn file(&self, name: &str) -> PathBuf {
        self.path().join(name)
    }

    fn run(&self, args: &[&str]) -> String {
        let mut full = vec!["--config", "run.toml"];
        full.extend_from_slice(args);
        ok(self.path(), &full)
    }

    fn run_raw(&self, args: &[&str]) -> Output {
        let mut full = vec!["--config", "run.toml"];
        full.extend_from_slice(args);
        drg(self.path(), &full)
    }

    fn write(&self, name: &str, body: &str) {
        fs::write(self.file(name), body).unwrap();
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.file(name)).unwrap()
    }
}

#[test]
fn help_version_and_usage_errors() {
    let dir = TempDir::new().unwrap();
    let help = ok(dir.path(), &["--help"]);
    for sub in ["extract-markers", "train", "train-lm", "train-classifier", "transfer", "eval", "sweep"] {
        assert!(help.contains(sub), "{sub}");
    }
    assert!(ok(dir.path(), &["--version"]).starts_with("drg "));

    let out = drg(dir.path(), &["transfer", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr(&out).trim_end().lines().count(), 1, "{}", stderr(&out));

    let out = drg(dir.path(), &["--config", "missing.toml", "extract-markers"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.toml"));
}

#[test]
fn configuration_problems_are_usage_errors() {
    let ws = Workspace::new();
    let out = ws.run_raw(&["--system", "magic", "train"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ws.run_raw(&["train"]);
    assert_eq!(out.status.code(), Some(1), "template has no generator: {}", stderr(&out));
    ws.write("in.txt", "the food was awful\n");
    let out = ws.run_raw(&["transfer", "--input", "in.txt", "--output", "o.txt", "--from", "neg", "--to", "neg"]);
    assert_eq!(out.status.code(), Some(1));
    let out = ws.run_raw(&["transfer", "--input", "in.txt", "--output", "o.txt", "--from", "meh"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn extract_markers_writes_a_stable_lexicon() {
    let ws = Workspace::new();
    let stdout = ws.run(&["extract-markers", "--top", "3"]);
    assert!(stdout.contains("neg:") && stdout.contains("pos:"));
    let first = ws.read("markers.tsv");
    assert!(first.lines().any(|l| l.starts_with("awful\tneg\t")));
    assert!(first.lines().any(|l| l.starts_with("friendly\tpos\t")));
    assert!(first.starts_with("# "));
    ws.run(&["extract-markers", "--top", "3"]);
    assert_eq!(ws.read("markers.tsv"), first);

    ws.run(&["--gamma", "inf", "extract-markers", "--out", "none.tsv"]);
    let none = ws.read("none.tsv");
    let body: Vec<&str> = none.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body, vec!["ngram\tattribute\tsalience"]);
}

#[test]
fn template_transfer_swaps_markers_and_keeps_plain_lines() {
    let ws = Workspace::new();
    ws.run(&["extract-markers"]);
    ws.write("in.txt", "the food was awful\nthe view and the price\n\nour staff was rude\n");
    ws.run(&[
        "transfer",
        "--input",
        "in.txt",
        "--output",
        "out.txt",
        "--from",
        "neg",
        "--dump-intermediate",
        "dump.tsv",
    ]);
    let out = ws.read("out.txt");
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(!lines[0].contains("awful"));
    assert!(["great", "friendly", "clean"].iter().any(|m| lines[0].contains(m)), "{}", lines[0]);
    // No markers: unchanged.
    assert_eq!(lines[1], "the view and the price");
    assert_eq!(lines[2], "");
    let dump = ws.read("dump.tsv");
    let first: Vec<&str> = dump.lines().next().unwrap().split('\t').collect();
    assert_eq!(first.len(), 6);
    assert_eq!(first[0], "the food was awful");
    assert_eq!(first[2], "awful");

    // Single-threaded runs give the same lines.
    ws.run(&["--deterministic", "transfer", "--input", "in.txt", "--output", "det.txt", "--from", "neg"]);
    assert_eq!(ws.read("det.txt"), out);
}

#[test]
fn retrieve_only_against_a_single_sentence() {
    let ws = Workspace::new();
    ws.write("one.txt", "a lovely clean room\n");
    let config = ws.read("run.toml").replace("pos = \"pos.txt\"", "pos = \"one.txt\"");
    ws.write("run.toml", &config);
    ws.write("in.txt", "the food was awful\nour staff was rude\n");
    ws.run(&["--system", "retrieve-only", "transfer", "--input", "in.txt", "--output", "out.txt", "--from", "neg", "--to", "pos"]);
    assert_eq!(ws.read("out.txt"), "a lovely clean room\na lovely clean room\n");
}

#[test]
fn saved_indexes_give_the_same_outputs() {
    let ws = Workspace::new();
    ws.run(&["extract-markers"]);
    ws.write("in.txt", "the food was awful\nour staff was rude\n");
    let base = ["transfer", "--input", "in.txt", "--from", "neg", "--to", "pos"];
    ws.run(&[&base[..], &["--output", "a.txt", "--save-index", "pos.idx"]].concat());
    ws.run(&[&base[..], &["--output", "b.txt", "--index", "pos.idx"]].concat());
    assert_eq!(ws.read("a.txt"), ws.read("b.txt"));
}

#[test]
fn training_is_reproducible_and_zero_epochs_work() {
    let ws = Workspace::new();
    ws.run(&["extract-markers"]);
    ws.run(&["--system", "delete-only", "train", "--out", "a.bin"]);
    ws.run(&["--system", "delete-only", "train", "--out", "b.bin"]);
    assert_eq!(fs::read(ws.file("a.bin")).unwrap(), fs::read(ws.file("b.bin")).unwrap());
    ws.run(&["--system", "delete-only", "--seed", "5", "train", "--out", "c.bin"]);
    assert_ne!(fs::read(ws.file("a.bin")).unwrap(), fs::read(ws.file("c.bin")).unwrap());

    let config = ws.read("run.toml").replacen("max_epochs = 1", "max_epochs = 0", 1);
    ws.write("run.toml", &config);
    ws.run(&["--system", "delete-only", "train"]);
    ws.write("in.txt", "the food was awful\n");
    ws.run(&["--system", "delete-only", "transfer", "--input", "in.txt", "--output", "out.txt", "--from", "neg"]);
    assert_eq!(ws.read("out.txt").lines().count(), 1);
}

#[test]
fn delete_and_retrieve_end_to_end() {
    let ws = Workspace::new();
    ws.run(&["extract-markers"]);
    ws.run(&["--system", "delete-and-retrieve", "train"]);
    ws.run(&["train-lm"]);
    assert!(ws.file("lm.neg.bin").exists() && ws.file("lm.pos.bin").exists());
    ws.write("in.txt", "the food was awful\nour staff was rude\n");
    ws.run(&[
        "--system",
        "delete-and-retrieve",
        "transfer",
        "--input",
        "in.txt",
        "--output",
        "out.txt",
        "--from",
        "neg",
    ]);
    assert_eq!(ws.read("out.txt").lines().count(), 2);
}

#[test]
fn eval_and_sweep_reports() {
    let ws = Workspace::new();
    ws.run(&["extract-markers"]);
    let stdout = ws.run(&["train-classifier"]);
    assert!(stdout.is_empty() || stdout.contains("accuracy"));
    ws.write("in.txt", "the food was awful\nour staff was rude\nthe room was dirty\n");
    ws.write("ref.txt", "the food was great\nour staff was friendly\nthe room was clean\n");
    ws.run(&[
        "eval",
        "--input",
        "in.txt",
        "--outputs",
        "ref.txt",
        "--references",
        "ref.txt",
        "--from",
        "neg",
        "--report",
        "rep/eval",
    ]);
    let kv = ws.read("rep/eval.kv");
    assert!(kv.lines().any(|l| l == "bleu=100"), "{kv}");
    assert!(kv.contains("classifier_score="));
    assert!(kv.contains("s_c="));
    assert!(ws.read("rep/eval.txt").contains("configuration"));
    assert_eq!(ws.read("rep/eval.examples.tsv").lines().count(), 4);

    let out = ws.run_raw(&["eval", "--input", "in.txt", "--outputs", "in.txt", "--from", "neg", "--references", "short.txt"]);
    assert_eq!(out.status.code(), Some(2));
    ws.write("short.txt", "one line\n");
    let out = ws.run_raw(&["eval", "--input", "in.txt", "--outputs", "short.txt", "--from", "neg"]);
    assert_eq!(out.status.code(), Some(2));

    let table = ws.run(&["sweep", "--input", "in.txt", "--from", "neg", "--gammas", "1000,5,2", "--report", "rep/s"]);
    assert_eq!(table.lines().count(), 4);
    let kv = ws.read("rep/s.sweep.kv");
    assert!(kv.starts_with("sweep.rows=3\nsweep.0.gamma=2\n"), "{kv}");
    assert!(kv.contains("sweep.2.lexicon_size=0"));
}

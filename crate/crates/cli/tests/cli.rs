use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn bnlp(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_bnlp"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn bnlp");
    child
        .stdin
        .take()
        .unwrap()
        .write_all(stdin.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn assert_ok(o: &Output) {
    assert_eq!(o.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn assert_failed(o: &Output, code: i32) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty(), "stdout on failure: {}", stdout(o));
    assert!(!o.stderr.is_empty());
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Tagged corpus where each word's label is fixed.
fn tagged_corpus(sentences: usize) -> String {
    let lexicon = [
        ("আমি", "PRP"),
        ("তুমি", "PRP"),
        ("ভাত", "NN"),
        ("মাছ", "NN"),
        ("বই", "NN"),
        ("খাই", "VM"),
        ("পড়ি", "VM"),
        ("।", "SYM"),
    ];
    let mut out = String::from("# synthetic\n");
    for i in 0..sentences {
        for j in 0..4 {
            let (w, l) = lexicon[(i * 3 + j * 5) % lexicon.len()];
            out.push_str(&format!("{w}\t{l}\n"));
        }
        out.push('\n');
    }
    out
}

#[test]
fn tokenize_basic_from_stdin() {
    let o = bnlp(&["tokenize", "--method", "basic"], "আমি ভাত খাই।\n");
    assert_ok(&o);
    assert_eq!(stdout(&o), "আমি ভাত খাই ।\n");
}

#[test]
fn tokenize_sentences_from_flag() {
    let o = bnlp(&["tokenize", "--method", "sentence", "--text", "আমি ভাত খাই। তুমি যাও?"], "");
    assert_ok(&o);
    assert_eq!(stdout(&o), "আমি ভাত খাই।\nতুমি যাও?\n");
}

#[test]
fn subword_method_requires_model() {
    assert_failed(&bnlp(&["tokenize", "--method", "subword"], "ক"), 1);
}

#[test]
fn usage_errors_exit_one() {
    assert_failed(&bnlp(&["frobnicate"], ""), 1);
    assert_failed(&bnlp(&["tokenize", "--method", "fancy"], ""), 1);
    assert_failed(&bnlp(&["crf-eval", "--model", "m", "--test", "t", "--scheme", "span"], ""), 1);
}

#[test]
fn missing_files_exit_two() {
    assert_failed(&bnlp(&["stats", "--input", "/nonexistent/corpus.txt"], ""), 2);
    assert_failed(&bnlp(&["crf-tag", "--model", "/nonexistent/model", "--text", "ক"], ""), 2);
}

#[test]
fn subword_train_config_precedence() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, "আমি ভাত খাই\nতুমি ভাত খাও\nসে মাছ খায়\nআমরা বই পড়ি\n").unwrap();
    let conf = dir.path().join("sw.conf");
    std::fs::write(&conf, "# file settings\nvocab_size = 40\nmax-piece-len = 4\n").unwrap();
    let model = dir.path().join("sw.model");

    let o = bnlp(&["subword-train", "--input", p(&corpus), "--out", p(&model), "--config", p(&conf)], "");
    assert_ok(&o);
    let header = std::fs::read_to_string(&model).unwrap();
    assert!(header.starts_with("#unigram v1 vocab_size=40\n"), "{header}");

    let o = bnlp(
        &["subword-train", "--input", p(&corpus), "--out", p(&model), "--config", p(&conf), "--vocab-size", "35"],
        "",
    );
    assert_ok(&o);
    assert!(std::fs::read_to_string(&model).unwrap().starts_with("#unigram v1 vocab_size=35\n"));

    let o = bnlp(&["tokenize", "--method", "subword", "--model", p(&model)], "আমি মাছ খাই\n");
    assert_ok(&o);
    let pieces = stdout(&o);
    let joined: String = pieces.trim_end().split(' ').collect::<Vec<_>>().concat();
    assert_eq!(joined.replace('\u{2581}', " ").trim(), "আমি মাছ খাই");

    std::fs::write(&conf, "vocab_size = 40\nunknown_knob = 3\n").unwrap();
    let o = bnlp(&["subword-train", "--input", p(&corpus), "--out", p(&model), "--config", p(&conf)], "");
    assert_failed(&o, 1);
}

#[test]
fn embed_train_and_query() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus.txt");
    let mut text = String::new();
    for _ in 0..50 {
        text.push_str("আমি ভাত খাই\nতুমি মাছ খাও\n");
    }
    std::fs::write(&corpus, text).unwrap();
    let model = dir.path().join("vec.bin");
    let args = [
        "embed-train", "--input", p(&corpus), "--out", p(&model), "--dim", "16", "--epochs", "2", "--seed", "3",
    ];
    assert_ok(&bnlp(&args, ""));
    let first = std::fs::read(&model).unwrap();
    assert_ok(&bnlp(&args, ""));
    assert_eq!(std::fs::read(&model).unwrap(), first);

    let o = bnlp(&["embed-query", "--model", p(&model), "--word", "ভাত", "--topk", "3"], "");
    assert_ok(&o);
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines.len(), 3);
    for line in &lines {
        let (word, sim) = line.split_once('\t').unwrap();
        assert_ne!(word, "ভাত");
        assert!(sim.parse::<f64>().unwrap().abs() <= 1.0);
    }
    assert_failed(&bnlp(&["embed-query", "--model", p(&model), "--word", "নেই"], ""), 2);
}

#[test]
fn crf_train_split_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("pos.tsv");
    std::fs::write(&data, tagged_corpus(40)).unwrap();
    let a = dir.path().join("a.crf");
    let b = dir.path().join("b.crf");
    for out in [&a, &b] {
        let o = bnlp(
            &["crf-train", "--task", "pos", "--train", p(&data), "--split", "0.75", "--seed", "7", "--out", p(out)],
            "",
        );
        assert_ok(&o);
        let report = stdout(&o);
        let fields: Vec<f64> = report.trim_end().split('\t').map(|s| s.parse().unwrap()).collect();
        assert_eq!(fields.len(), 3);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn crf_eval_on_memorized_data_is_perfect() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("pos.tsv");
    std::fs::write(&data, tagged_corpus(20)).unwrap();
    let model = dir.path().join("m.crf");
    assert_ok(&bnlp(&["crf-train", "--task", "pos", "--train", p(&data), "--out", p(&model)], ""));
    for scheme in ["token-all", "token-nonO"] {
        let o = bnlp(&["crf-eval", "--model", p(&model), "--test", p(&data), "--scheme", scheme], "");
        assert_ok(&o);
        assert_eq!(stdout(&o), "100.00\t100.00\t100.00\n");
    }

    let o = bnlp(&["crf-tag", "--model", p(&model), "--text", "আমি ভাত খাই।"], "");
    assert_ok(&o);
    assert_eq!(stdout(&o), "আমি/PRP ভাত/NN খাই/VM ।/SYM\n");
    let o = bnlp(&["crf-tag", "--model", p(&model), "--stdin"], "তুমি বই পড়ি।\n\nআমি\n");
    assert_ok(&o);
    assert_eq!(stdout(&o), "তুমি/PRP বই/NN পড়ি/VM ।/SYM\n\nআমি/PRP\n");
}

#[test]
fn crf_train_rejects_malformed_tsv() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.tsv");
    std::fs::write(&data, "ক\tNN\nখ\tNN\textra\n").unwrap();
    let o = bnlp(&["crf-train", "--task", "ner", "--train", p(&data), "--out", p(&dir.path().join("m"))], "");
    assert_failed(&o, 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains(":2:"));
    assert!(!dir.path().join("m").exists());
}

#[test]
fn stats_counts_documents() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus.txt");
    std::fs::write(&corpus, "আমি ভাত খাই। তুমি যাও।\n\nসে আসে।\n").unwrap();
    let o = bnlp(&["stats", "--input", p(&corpus)], "");
    assert_ok(&o);
    assert_eq!(stdout(&o), "documents\t2\nsentences\t3\ntokens\t10\n");
    std::fs::write(&corpus, b"ok\n\xff\n").unwrap();
    assert_failed(&bnlp(&["stats", "--input", p(&corpus)], ""), 2);
}

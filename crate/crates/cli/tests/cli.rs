use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn redrep(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_redrep"))
        .args(args)
        .current_dir(dir)
        .env_remove("REDREP_CONFIG")
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = redrep(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out.stderr.is_empty());
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn synth_and_split(dir: &Path) {
    ok(dir, &["synth", "--seed", "3", "--n", "300", "--out", "all.conll"]);
    ok(dir, &["split", "--seed", "3", "--input", "all.conll", "--out-dir", "parts"]);
}

#[test]
fn synth_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "7", "--n", "200", "--out", "a.conll"]);
    ok(d, &["synth", "--seed", "7", "--n", "200", "--out", "b.conll"]);
    ok(d, &["synth", "--seed", "8", "--n", "200", "--out", "c.conll"]);
    let read = |n: &str| std::fs::read(d.join(n)).unwrap();
    assert_eq!(read("a.conll"), read("b.conll"));
    assert_ne!(read("a.conll"), read("c.conll"));
}

#[test]
fn train_eval_report_has_metrics_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_and_split(d);
    ok(d, &["train", "--model", "crf", "--rir", "on", "--train", "parts/train.conll", "--out", "model.rr"]);
    let table = ok(d, &["eval", "--model", "model.rr", "--test", "parts/test.conll", "--report", "r.json"]);
    assert!(table.contains("macro"));
    let r = json(d, "r.json");
    let f1 = r["macro_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    assert_eq!(r["config.model.kind"], "crf");
    assert_eq!(r["config.model.use_rir"], "true");
    assert_eq!(r["config.paths.test"], "parts/test.conll");
}

#[test]
fn predict_output_feeds_eval() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_and_split(d);
    ok(d, &["train", "--model", "logreg", "--train", "parts/train.conll", "--out", "model.rr"]);
    ok(d, &["predict", "--model", "model.rr", "--input", "parts/test.conll", "--out", "pred.conll"]);
    ok(d, &["eval", "--gold", "parts/test.conll", "--pred", "pred.conll", "--report", "a.json"]);
    ok(d, &["eval", "--model", "model.rr", "--test", "parts/test.conll", "--report", "b.json"]);
    for key in ["macro_f1", "redup_f1", "rep_f1", "other_f1"] {
        assert_eq!(json(d, "a.json")[key], json(d, "b.json")[key], "{key}");
    }
}

#[test]
fn multi_run_report_carries_mean_and_std() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synth_and_split(d);
    let args =
        ["eval", "--seed", "10", "--train", "parts/train.conll", "--test", "parts/test.conll", "--runs", "5", "--epochs", "1"];
    ok(d, &[&args[..], &["--report", "r.json"]].concat());
    let r = json(d, "r.json");
    assert_eq!(r["runs"], 5);
    assert_eq!(r["seeds"], "10,11,12,13,14");
    assert!(r["macro_f1_std"].as_f64().unwrap() >= 0.0);
    assert_eq!(r["config.train.epochs"], "1");
    assert_eq!(r["config.seed"], "10");
}

#[test]
fn config_file_env_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("file.cfg"), "synth.n = 5\nseed = 1\n").unwrap();
    std::fs::write(d.join("env.cfg"), "synth.n = 9\n").unwrap();

    ok(d, &["synth", "--config", "file.cfg", "--out", "a.conll"]);
    let count = |name: &str| std::fs::read_to_string(d.join(name)).unwrap().matches("# id = ").count();
    assert_eq!(count("a.conll"), 5);

    ok(d, &["synth", "--config", "file.cfg", "--n", "7", "--out", "b.conll"]);
    assert_eq!(count("b.conll"), 7);

    let out = Command::new(env!("CARGO_BIN_EXE_redrep"))
        .args(["synth", "--out", "c.conll"])
        .current_dir(d)
        .env("REDREP_CONFIG", "env.cfg")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(count("c.conll"), 9);

    std::fs::write(d.join("bad.cfg"), "synth.bogus = 1\n").unwrap();
    assert_eq!(code(&redrep(d, &["synth", "--config", "bad.cfg", "--out", "x.conll"])), 1);
}

#[test]
fn exit_codes_and_single_line_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let usage = redrep(d, &["train", "--train", "x.conll"]);
    assert_eq!(code(&usage), 1);
    assert_eq!(code(&redrep(d, &["nonsense"])), 1);
    assert_eq!(code(&redrep(d, &["synth", "--p-rep", "1.5", "--out", "x.conll"])), 1);
    assert_eq!(code(&redrep(d, &["train", "--model", "svm", "--train", "x", "--out", "y"])), 1);

    let missing = redrep(d, &["eval", "--model", "nope.rr", "--test", "nope.conll"]);
    assert_eq!(code(&missing), 2);
    let stderr = String::from_utf8(missing.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(missing.stdout.is_empty());

    std::fs::write(d.join("bad.conll"), "a\treduplication\nb\tnonsense\n").unwrap();
    assert_eq!(code(&redrep(d, &["split", "--input", "bad.conll", "--out-dir", "p"])), 2);
    std::fs::write(d.join("model.rr"), "redrep-model v999 crf\n").unwrap();
    std::fs::write(d.join("ok.conll"), "a\tO\n").unwrap();
    assert_eq!(code(&redrep(d, &["predict", "--model", "model.rr", "--input", "ok.conll"])), 2);
    assert_eq!(code(&redrep(d, &["--help"])), 0);
}

#[test]
fn inspect_spans_lines() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("in.conll"), "# id = ex2\nvah\nneela\nnahi\nneela\nneela\nphool\nhai\n").unwrap();
    let out = ok(d, &["inspect-spans", "--input", "in.conll"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines, vec!["ex2\t[1,2)\t[2,3)\t[3,4)\trepetition", "ex2\t[3,4)\t[4,4)\t[4,5)\treduplication"]);
}

#[test]
fn kappa_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("labels.txt"), "O O\nO repetition\n").unwrap();
    let out = ok(d, &["kappa", "--input", "labels.txt", "--report", "k.json"]);
    assert!(out.contains("kappa -0.333333"), "{out}");
    assert!((json(d, "k.json")["kappa"].as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-12);
    std::fs::write(d.join("counts.txt"), "0 4\n0 4\n").unwrap();
    assert_eq!(code(&redrep(d, &["kappa", "--input", "counts.txt"])), 2);
}

#[test]
fn verify_stats_reports_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "1", "--n", "20", "--language", "te", "--out", "te.conll"]);
    let out = redrep(d, &["verify-stats", "--input", "te.conll", "--split", "test"]);
    assert_eq!(code(&out), 2);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("te:sentences") && stdout.contains("161") && stdout.contains("FAIL"), "{stdout}");
    assert_eq!(code(&redrep(d, &["verify-stats", "--input", "te.conll", "--split", "dev"])), 1);
}

#[test]
fn ablation_without_duplications_scores_identically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let flat = ["--p-redup", "0", "--p-rep", "0", "--p-other", "0", "--p-confusion", "0"];
    ok(d, &[&["synth", "--seed", "1", "--n", "60", "--out", "train.conll"][..], &flat].concat());
    ok(d, &[&["synth", "--seed", "2", "--n", "20", "--out", "test.conll"][..], &flat].concat());
    let args = ["ablation", "--train", "train.conll", "--test", "test.conll", "--epochs", "1", "--report", "a.json"];
    ok(d, &args);
    let first = std::fs::read(d.join("a.json")).unwrap();
    let r = json(d, "a.json");
    assert_eq!(r["without_rir"]["macro_f1"], r["with_rir"]["macro_f1"]);
    assert_eq!(r["delta_macro_f1"], 0.0);
    assert_eq!(r["config.seed"], "0");
    ok(d, &args);
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), first);
}

use std::path::Path;
use std::process::{Command, Output};

use rootterm::manifest::{manifest_path, RunManifest};

fn rootterm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rootterm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = rootterm(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn fails(dir: &Path, args: &[&str]) -> String {
    let out = rootterm(dir, args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

fn small_dataset(dir: &Path, name: &str) {
    ok(dir, &["gen-dataset", "--states", "40", "--seed", "1", "--out", name]);
}

#[test]
fn gen_dataset_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["gen-dataset", "--states", "200", "--seed", "1", "--out", "a.jsonl"]);
    ok(d, &["gen-dataset", "--states", "200", "--seed", "1", "--out", "b.jsonl"]);
    let a = read(d, "a.jsonl");
    assert_eq!(a, read(d, "b.jsonl"));
    assert_eq!(a.iter().filter(|&&c| c == b'\n').count(), 201);
    let m = RunManifest::read(&manifest_path(&d.join("a.jsonl"))).unwrap();
    assert_eq!(m.command, "gen-dataset");
    assert_eq!(m.parameters["generation"]["seed"], 1);
    assert_eq!(m.artifacts, vec!["a.jsonl".to_string()]);
}

#[test]
fn infeasible_flags_are_refused() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let err = fails(d, &["gen-dataset", "--trace-len", "16", "--label-mode", "sh", "--label-budget", "128", "--out", "x.jsonl"]);
    assert!(err.contains("schedule infeasible"), "{err}");
    let err = fails(d, &["gen-dataset", "--trace-len", "16", "--out", "x.jsonl"]);
    assert!(err.contains("minimum of 32"), "{err}");
    let err = fails(d, &["gen-dataset", "--trace-len", "32", "--label-mode", "sh", "--label-budget", "256", "--out", "x.jsonl"]);
    assert!(err.contains("schedule infeasible"), "{err}");
    fails(d, &["gen-dataset", "--branching", "1", "--out", "x.jsonl"]);
    fails(d, &["gen-dataset", "--depth", "2", "--opening-plies", "2", "--out", "x.jsonl"]);
    assert!(!d.join("x.jsonl").exists());
}

#[test]
fn discover_logs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d, "d.jsonl");
    for out in ["l1.jsonl", "l2.jsonl"] {
        ok(d, &["discover", "--dataset", "d.jsonl", "--mode", "uniform", "--budget-exprs", "1000", "--workers", "1", "--seed", "7", "--out", out]);
    }
    assert_eq!(read(d, "l1.jsonl"), read(d, "l2.jsonl"));
    assert_eq!(read(d, "l1.jsonl.best.tsv"), read(d, "l2.jsonl.best.tsv"));
    let log = String::from_utf8(read(d, "l1.jsonl")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
    assert_eq!(summary["type"], "summary");
    assert_eq!(summary["evaluated"], 1000);
    assert!(!log.contains("elapsed_s"));
}

#[test]
fn amaf_discovery_records_temperature() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d, "d.jsonl");
    ok(d, &["discover", "--dataset", "d.jsonl", "--mode", "amaf", "--temperature", "5", "--budget-exprs", "200", "--out", "l.jsonl"]);
    ok(d, &["discover", "--dataset", "d.jsonl", "--mode", "amaf", "--budget-seconds", "0.3", "--workers", "3", "--out", "t.jsonl"]);
    let m = RunManifest::read(&manifest_path(&d.join("l.jsonl"))).unwrap();
    assert_eq!(m.parameters["temperature"], 5.0);
    assert_eq!(m.parameters["mode"], "amaf");
    let timed = String::from_utf8(read(d, "t.jsonl")).unwrap();
    assert!(timed.contains("elapsed_s"));
}

#[test]
fn discover_needs_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let err = fails(dir.path(), &["discover", "--dataset", "nope.jsonl", "--out", "l.jsonl"]);
    assert!(err.contains("nope.jsonl"), "{err}");
    small_dataset(dir.path(), "d.jsonl");
    fails(dir.path(), &["discover", "--dataset", "d.jsonl", "--temperature", "0", "--out", "l.jsonl"]);
    fails(dir.path(), &["discover", "--dataset", "d.jsonl", "--budget-exprs", "5", "--budget-seconds", "1", "--out", "l.jsonl"]);
}

#[test]
fn eval_term_reports_rows_in_order() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d, "d.jsonl");
    let out = ok(d, &["eval-term", "--dataset", "d.jsonl", "--term", "sc", "--term", "pr", "--term", "+ pr * * 2 sc sc", "--out", "r.tsv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("sc\t"));
    assert!(rows[1].starts_with("pr\t"));
    assert!(rows[2].starts_with("+ pr * * 2 sc sc\t(pr + ((2 * sc) * sc))\t"));
    assert_eq!(read(d, "r.tsv"), text.into_bytes());
    let err = fails(d, &["eval-term", "--dataset", "d.jsonl", "--term", "bogus"]);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn relabel_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_dataset(d, "d.jsonl");
    ok(d, &["relabel", "--dataset", "d.jsonl", "--budget", "128", "--out", "r.jsonl"]);
    let out = ok(d, &["eval-term", "--dataset", "r.jsonl", "--term", "sc", "--budget", "128", "--top-k", "8"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().last().unwrap().ends_with("\t100.00"), "{text}");
}

#[test]
fn match_writes_table_and_games() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["match", "--engine-a", "puct:c=0.2", "--engine-b", "puct:c=0.2", "--games", "40", "--evals", "8", "--depth", "6", "--out", "m.tsv"]);
    let table = String::from_utf8(read(d, "m.tsv")).unwrap();
    assert_eq!(table.lines().nth(2).unwrap(), "0.2\t50.00");
    ok(d, &["match", "--engine-a", "puct:c=0.2", "--engine-b", "puct:c=0.2", "--games", "40", "--evals", "8", "--depth", "6", "--out", "m2.tsv"]);
    assert_eq!(read(d, "m.tsv.games.jsonl"), read(d, "m2.tsv.games.jsonl"));

    ok(d, &[
        "match",
        "--engine-a", "puct+term:c_e=0.1,term=\"/ 1 log + sc nb\"",
        "--engine-b", "puct:c=0.2",
        "--grid-a", "0.1,0.3",
        "--grid-b", "0.05..0.15:0.05",
        "--games", "4", "--evals", "4", "--depth", "5",
        "--out", "g.tsv",
    ]);
    let grid = String::from_utf8(read(d, "g.tsv")).unwrap();
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(lines[1], "c_e/c\t0.05\t0.1\t0.15");
    assert_eq!(lines.len(), 4);
}

#[test]
fn match_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fails(d, &["match", "--engine-a", "alphabeta", "--out", "m.tsv"]);
    fails(d, &["match", "--engine-b", "shuss:k=x", "--out", "m.tsv"]);
    fails(d, &["match", "--games", "3", "--out", "m.tsv"]);
    fails(d, &["match", "--grid-a", "1..0:1", "--out", "m.tsv"]);
    fails(d, &["match", "--openings", "missing.jsonl", "--out", "m.tsv"]);
    assert!(!d.join("m.tsv").exists());
}

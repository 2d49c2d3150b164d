use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn unnest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unnest"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn json_lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn refactor_writes_one_record_per_line() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "in.txt",
        "IF(C1,IF(C2,IF(C3,V1,V2),V2),V2)\nIF(C1,V1,IF(C2,V1,IF(C3,V1,V2)))\nB7\tIF(A1=C1,D1,IF(A1=C2,D2,IF(A1=C3,D3,IF(A1=C4,D4))))\nnot a formula(((\n",
    );
    let out = path(&dir, "out.jsonl");
    let o = unnest(&["refactor", "--in", &input, "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let recs = json_lines(Path::new(&out));
    assert_eq!(recs.len(), 4);
    assert_eq!(recs[0]["refactored"], "IF(AND(C1,C2,C3),V1,V2)");
    assert_eq!(recs[1]["refactored"], "IF(OR(C1,C2,C3),V1,V2)");
    assert_eq!(recs[2]["refactored"], "VLOOKUP(A1,C1:D4,2,FALSE)");
    assert_eq!(recs[2]["anchor"], "B7");
    assert_eq!(recs[0]["pList"][1], true);
    assert!(recs[3]["error"].as_str().unwrap().contains("parse error"));
}

#[test]
fn empty_input_gives_empty_output() {
    let dir = TempDir::new().unwrap();
    let input = write(&dir, "empty.txt", "");
    let out = path(&dir, "out.jsonl");
    let o = unnest(&["refactor", "--in", &input, "--out", &out]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out).unwrap(), "");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = path(&dir, "missing.txt");
    assert_eq!(unnest(&["refactor", "--in", &missing]).status.code(), Some(1));
    let input = write(&dir, "in.txt", "IF(A1,1,2)\n");
    assert_eq!(
        unnest(&["verify", "--envs", "0", "--in", &input]).status.code(),
        Some(2)
    );
    assert_eq!(
        unnest(&["refactor", "--mode", "loose", "--in", &input]).status.code(),
        Some(2)
    );
    assert_eq!(
        unnest(&["refactor", "--patterns", "AND,XOR", "--in", &input])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(unnest(&["generate", "--min-depth", "1"]).status.code(), Some(2));
    assert_eq!(unnest(&["generate", "--counts", "AND"]).status.code(), Some(2));
}

#[test]
fn verify_reports_paper_mode_ifs_counterexamples() {
    let dir = TempDir::new().unwrap();
    let input = write(
        &dir,
        "in.txt",
        "IF(C1,V1,IF(C2,V2,IF(C3,V3,IF(C4,V4))))\nIF(A1>B1,IF(C1,1,2),IF(C1,1,2))\n",
    );
    let recs = path(&dir, "recs.jsonl");
    assert!(unnest(&["refactor", "--no-verify", "--in", &input, "--out", &recs])
        .status
        .success());
    let checked = path(&dir, "checked.jsonl");
    let o = unnest(&[
        "verify", "--envs", "200", "--seed", "7", "--in", &recs, "--out", &checked,
    ]);
    assert!(o.status.success());
    let lines = json_lines(Path::new(&checked));
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["inDomainEqual"], true);
    assert_eq!(lines[0]["strictEqual"], false);
    assert!(lines[0]["counterexample"].is_object());
    assert_eq!(lines[1]["strictEqual"], true);
    let summary = &lines[2];
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["summary"]["seed"], 7);
    assert_eq!(summary["summary"]["envCount"], 200);
}

#[test]
fn stats_clusters_dragged_copies() {
    let dir = TempDir::new().unwrap();
    let text: String = (1..=10)
        .map(|r| format!("C{r}\tIF(A{r}>0,IF(B{r}>0,1,2),3)\n"))
        .collect();
    let input = write(&dir, "in.txt", &format!("{text}IF(A1,1,2)\nbad(\n"));
    let out = path(&dir, "stats.json");
    assert!(unnest(&["stats", "--in", &input, "--out", &out]).status.success());
    let s: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(s["totalCount"], 12);
    assert_eq!(s["uniqueCount"], 2);
    assert_eq!(s["parseErrors"], 1);
    assert_eq!(s["ifDepthRanges"]["(1,5]"], 10);
    assert_eq!(s["clusters"][0]["size"], 10);
    assert!(s["config"].is_object());
}

#[test]
fn generated_templates_reduce_and_controls_stay() {
    let dir = TempDir::new().unwrap();
    let corpus = path(&dir, "gen.txt");
    let again = path(&dir, "gen2.txt");
    let manifest = path(&dir, "manifest.json");
    let args = [
        "generate",
        "--counts",
        "AND=5",
        "--min-depth",
        "3",
        "--max-depth",
        "6",
        "--controls",
        "2",
        "--seed",
        "1",
    ];
    assert!(
        unnest(&[&args[..], &["--out", &corpus, "--manifest", &manifest]].concat())
            .status
            .success()
    );
    assert!(unnest(&[&args[..], &["--out", &again]].concat()).status.success());
    assert_eq!(
        fs::read_to_string(&corpus).unwrap(),
        fs::read_to_string(&again).unwrap()
    );

    let m: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(m["lines"].as_array().unwrap().len(), 7);
    assert_eq!(m["spec"]["seed"], 1);

    let recs = path(&dir, "recs.jsonl");
    assert!(unnest(&["refactor", "--in", &corpus, "--out", &recs]).status.success());
    let recs = json_lines(Path::new(&recs));
    for r in &recs[..5] {
        assert_eq!(r["changed"], true, "{r}");
        assert!(r["depthAfter"].as_u64().unwrap() <= 1);
        assert!(r["applied"].as_array().unwrap().iter().any(|p| p == "AND"));
    }
    for r in &recs[5..] {
        assert_eq!(r["changed"], false, "{r}");
    }
}

#[test]
fn report_arithmetic_and_config() {
    let dir = TempDir::new().unwrap();
    let corpus = path(&dir, "gen.txt");
    assert!(unnest(&[
        "generate",
        "--count",
        "4",
        "--controls",
        "3",
        "--seed",
        "5",
        "--out",
        &corpus
    ])
    .status
    .success());
    let out = path(&dir, "report.json");
    assert!(unnest(&["report", "--seed", "9", "--in", &corpus, "--out", &out])
        .status
        .success());
    let r: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let total = r["totalCount"].as_f64().unwrap();
    let refactored = r["refactoredCount"].as_f64().unwrap();
    assert_eq!(total, 35.0);
    assert_eq!(refactored, 32.0);
    assert_eq!(r["coveragePct"].as_f64().unwrap(), refactored * 100.0 / total);
    assert_eq!(r["config"]["seed"], 9);
    let m = r["overlapMatrix"].as_array().unwrap();
    for (i, row) in m.iter().enumerate() {
        for (j, cell) in row.as_array().unwrap().iter().enumerate() {
            assert_eq!(cell, &m[j][i]);
        }
    }
    let bins: u64 = r["ratioBins"]
        .as_object()
        .unwrap()
        .values()
        .map(|v| v.as_u64().unwrap())
        .sum();
    assert_eq!(bins + r["unreduced"].as_u64().unwrap(), 35);

    let recs = path(&dir, "recs.jsonl");
    assert!(unnest(&["refactor", "--seed", "9", "--in", &corpus, "--out", &recs])
        .status
        .success());
    let from_records = path(&dir, "report2.json");
    assert!(unnest(&["report", "--records", "--in", &recs, "--out", &from_records])
        .status
        .success());
    let r2: Value = serde_json::from_str(&fs::read_to_string(&from_records).unwrap()).unwrap();
    assert_eq!(r2["refactoredCount"], r["refactoredCount"]);
    assert!(r2.get("config").is_none());
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let dir = TempDir::new().unwrap();
    let corpus = path(&dir, "gen.txt");
    assert!(unnest(&["generate", "--count", "6", "--seed", "2", "--out", &corpus])
        .status
        .success());
    let a = unnest(&["refactor", "--in", &corpus]);
    let b = unnest(&["refactor", "--sequential", "--in", &corpus]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

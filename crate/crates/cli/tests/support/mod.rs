//! Golden-file checks for the `novelsum` binary. Reports are compared byte for
//! byte after zeroing `duration_ms`. Set `UPDATE_GOLDEN=1` to rewrite the files.

#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use novelsum_core::io::save_embeddings;
use novelsum_core::EmbeddingMatrix;
use tempfile::TempDir;

pub const BIN: &str = env!("CARGO_BIN_EXE_novelsum");

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Smooth deterministic rows with no zero vector.
pub fn fixture(n: usize, dim: usize, phase: f32) -> EmbeddingMatrix {
    let data = (0..n)
        .flat_map(|i| (0..dim).map(move |d| (i as f32 * 1.3 + d as f32 * 0.7 + phase).sin() + 0.05 * (d + 1) as f32))
        .collect();
    EmbeddingMatrix::new(dim, data).unwrap()
}

pub struct Workspace {
    dir: TempDir,
}

impl Workspace {
    pub fn new() -> Self {
        Self { dir: tempfile::tempdir().unwrap() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn embeddings(&self, name: &str, m: &EmbeddingMatrix) -> PathBuf {
        let p = self.path(name);
        save_embeddings(m, &p).unwrap();
        p
    }

    pub fn text(&self, name: &str, body: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, body).unwrap();
        p
    }
}

pub fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    Command::new(BIN)
        .args(args.iter().map(|a| a.as_ref()))
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

#[track_caller]
pub fn expect_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Replaces the value of every `"duration_ms": N` with 0.
pub fn mask_durations(text: &str) -> String {
    const KEY: &str = "\"duration_ms\": ";
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(pos) = rest.find(KEY) {
        out.push_str(&rest[..pos + KEY.len()]);
        rest = rest[pos + KEY.len()..].trim_start_matches(|c: char| c.is_ascii_digit());
        out.push('0');
    }
    out.push_str(rest);
    out
}

#[track_caller]
pub fn assert_golden(name: &str, produced: &Path) {
    let got = mask_durations(&fs::read_to_string(produced).unwrap());
    let path = golden_dir().join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, &got).unwrap();
        return;
    }
    let want = fs::read_to_string(&path).unwrap_or_else(|e| panic!("missing golden {}: {e}", path.display()));
    assert!(got == want, "{name} differs from golden\n--- got ---\n{got}\n--- want ---\n{want}");
}

#[track_caller]
fn stdout_is(out: &Output, paths: &[&Path]) {
    let want: String = paths.iter().map(|p| format!("{}\n", p.display())).collect();
    assert_eq!(String::from_utf8_lossy(&out.stdout), want, "stdout carries only report paths");
}

pub fn score_novelsum() {
    let ws = Workspace::new();
    let data = ws.embeddings("d.emb", &fixture(12, 4, 0.0));
    let reference = ws.embeddings("all.emb", &fixture(30, 4, 0.4));
    let out = ws.path("report.json");
    let o = run(&[&"score", &"--metric", &"novelsum", &"--embeddings", &data, &"--reference", &reference, &"--out", &out]);
    expect_exit(&o, 0);
    stdout_is(&o, &[&out]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["alpha"], 1.0);
    assert_eq!(v["config"]["beta"], 0.5);
    assert_eq!(v["config"]["k"], 10);
    assert!(v["duration_ms"].is_u64());
    assert_golden("score_novelsum.json", &out);
}

pub fn score_ldd_duplicates() {
    let ws = Workspace::new();
    let dups = EmbeddingMatrix::from_rows(&[[0.3f32, -1.0, 2.0, 0.5]; 6]).unwrap();
    let data = ws.embeddings("dups.emb", &dups);
    let out = ws.path("ldd.json");
    let o = run(&[&"score", &"--metric", &"ldd", &"--embeddings", &data, &"--out", &out]);
    expect_exit(&o, 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["score"], "-inf");
    assert_golden("score_ldd_duplicates.json", &out);
}

pub fn score_baselines() {
    let ws = Workspace::new();
    let data = ws.embeddings("d.emb", &fixture(16, 5, 1.0));
    for metric in ["distsum_cosine", "distsum_l2", "knn_distance", "vendi", "radius"] {
        let out = ws.path(&format!("{metric}.json"));
        let o = run(&[&"score", &"--metric", &metric, &"--embeddings", &data, &"--out", &out]);
        expect_exit(&o, 0);
        assert_golden(&format!("score_{metric}.json"), &out);
    }
}

pub fn score_ttr() {
    let ws = Workspace::new();
    let corpus = ws.text(
        "c.jsonl",
        "{\"text\": \"the cat sat on the mat and the dog sat on the log\"}\n{\"tokens\": [\"a\", \"b\", \"a\", \"c\"]}\n",
    );
    let out = ws.path("ttr.json");
    let o = run(&[&"score", &"--metric", &"ttr", &"--corpus", &corpus, &"--out", &out]);
    expect_exit(&o, 0);
    assert_golden("score_ttr.json", &out);
}

pub fn score_input_errors() {
    let ws = Workspace::new();
    let data = ws.embeddings("d.emb", &fixture(8, 3, 0.0));
    let out = ws.path("x.json");
    let o = run(&[&"score", &"--metric", &"nosuch", &"--embeddings", &data, &"--out", &out]);
    expect_exit(&o, 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nosuch"));
    let o = run(&[&"score", &"--metric", &"ttr", &"--embeddings", &data, &"--out", &out]);
    expect_exit(&o, 2);
    let bad = ws.text("bad.emb", "not an embedding file");
    let o = run(&[&"score", &"--metric", &"radius", &"--embeddings", &bad, &"--out", &out]);
    expect_exit(&o, 2);
    assert!(!out.exists());
}

pub fn select_novelselect() {
    let ws = Workspace::new();
    let pool = ws.embeddings("pool.emb", &fixture(40, 4, 0.2));
    let out = ws.path("sel.json");
    let subset = ws.path("sub.emb");
    let o = run(&[
        &"select", &"--strategy", &"novelselect", &"--pool", &pool, &"--budget", &"8", &"--seed", &"42", &"--out", &out,
        &"--emit-subset", &subset,
    ]);
    expect_exit(&o, 0);
    stdout_is(&o, &[&out, &subset]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let idx: Vec<u64> = v["indices"].as_array().unwrap().iter().map(|i| i.as_u64().unwrap()).collect();
    let mut uniq = idx.clone();
    uniq.sort_unstable();
    uniq.dedup();
    assert_eq!(uniq.len(), 8);
    let sub = novelsum_core::io::load_embeddings(&subset).unwrap();
    assert_eq!(sub.len(), 8);
    assert_golden("select_novelselect.json", &out);
}

pub fn select_duplicate() {
    let ws = Workspace::new();
    let pool = ws.embeddings("pool.emb", &fixture(40, 4, 0.2));
    let out = ws.path("dup.json");
    let o = run(&[&"select", &"--strategy", &"duplicate", &"--pool", &pool, &"--budget", &"100", &"--unique", &"10", &"--out", &out]);
    expect_exit(&o, 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let idx: Vec<u64> = v["indices"].as_array().unwrap().iter().map(|i| i.as_u64().unwrap()).collect();
    assert_eq!(idx.len(), 100);
    let mut counts = std::collections::BTreeMap::new();
    for i in idx {
        *counts.entry(i).or_insert(0) += 1;
    }
    assert_eq!(counts.len(), 10);
    assert!(counts.values().all(|&c| c == 10));
    assert_golden("select_duplicate.json", &out);
}

pub fn select_reprfilter_exhausted() {
    let ws = Workspace::new();
    let same = EmbeddingMatrix::from_rows(&[[1.0f32, 2.0, 3.0]; 6]).unwrap();
    let pool = ws.embeddings("same.emb", &same);
    let out = ws.path("repr.json");
    let o = run(&[
        &"select", &"--strategy", &"reprfilter", &"--pool", &pool, &"--budget", &"3", &"--threshold", &"0.3", &"--out", &out,
    ]);
    expect_exit(&o, 4);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["partial"], true);
    assert_eq!(v["indices"].as_array().unwrap().len(), 1);
    assert_golden("select_reprfilter_partial.json", &out);
}

pub fn select_budget_too_large() {
    let ws = Workspace::new();
    let pool = ws.embeddings("pool.emb", &fixture(5, 3, 0.0));
    let out = ws.path("sel.json");
    let o = run(&[&"select", &"--strategy", &"kcenter", &"--pool", &pool, &"--budget", &"6", &"--out", &out]);
    expect_exit(&o, 2);
}

pub fn simulate_single_seed() {
    let ws = Workspace::new();
    let out = ws.path("sim.csv");
    let o = run(&[&"simulate", &"--seed", &"42", &"--out", &out]);
    expect_exit(&o, 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("selection,metric,score,flag\n"));
    assert_eq!(text.lines().count(), 10);
    assert_golden("simulate_seed42.csv", &out);
}

pub fn simulate_seed_range() {
    let ws = Workspace::new();
    let out = ws.path("sim.csv");
    let summary = ws.path("summary.json");
    let o = run(&[&"simulate", &"--seeds", &"0..2", &"--out", &out, &"--summary", &summary]);
    expect_exit(&o, 0);
    stdout_is(&o, &[&out, &summary]);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("seed,selection,metric,score,flag\n"));
    assert_eq!(text.lines().count(), 1 + 3 * 9);
    assert_golden("simulate_seeds_0_2.csv", &out);
    assert_golden("simulate_summary_0_2.json", &summary);
}

pub fn simulate_needs_output() {
    let o = run(&[&"simulate", &"--seed", &"1"]);
    expect_exit(&o, 2);
}

pub fn correlate_ranking() {
    let ws = Workspace::new();
    let table = ws.text(
        "t.csv",
        "dataset,exact,noisy,inverse,performance\n\
         a,1,1.5,5,1\nb,2,1.8,4,2\nc,3,3.9,3,3\nd,4,3.7,2,4\ne,5,5.2,1,5\n",
    );
    let out = ws.path("corr.csv");
    let o = run(&[&"correlate", &"--table", &table, &"--out", &out]);
    expect_exit(&o, 0);
    let text = fs::read_to_string(&out).unwrap();
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("exact,1,1,1,"), "{first}");
    assert!(text.lines().last().unwrap().starts_with("inverse,-1,-1,-1,"));
    assert_golden("correlate_ranking.csv", &out);
}

pub fn correlate_aggregate_with_neg_inf() {
    let ws = Workspace::new();
    let table = ws.text(
        "t.csv",
        "dataset,ldd,novelsum,alpaca,mtbench\n\
         dup,-inf,0.1,10,2\nr1,-3,0.5,40,5\nr2,-2,0.6,60,6\nr3,-1,0.7,70,6.5\n",
    );
    let out = ws.path("corr.csv");
    let o = run(&[&"correlate", &"--table", &table, &"--aggregate", &"alpaca,mtbench", &"--out", &out]);
    expect_exit(&o, 0);
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.lines().any(|l| l.starts_with("ldd,") && l.ends_with(",dup")), "{text}");
    assert_golden("correlate_aggregate.csv", &out);
}

pub fn correlate_too_few_rows() {
    let ws = Workspace::new();
    let table = ws.text("t.csv", "dataset,m,performance\na,1,1\nb,2,2\n");
    let out = ws.path("corr.csv");
    let o = run(&[&"correlate", &"--table", &table, &"--out", &out]);
    expect_exit(&o, 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("at least 3 rows"));
}

pub fn config_file_precedence() {
    let ws = Workspace::new();
    let data = ws.embeddings("d.emb", &fixture(12, 4, 0.0));
    let cfg = ws.text("run.conf", "# defaults\nalpha = 2\nk = 5\n");
    let out = ws.path("r.json");
    let o = run(&[
        &"--config", &cfg, &"score", &"--metric", &"novelsum", &"--embeddings", &data, &"--k", &"3", &"--out", &out,
    ]);
    expect_exit(&o, 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["alpha"], 2.0);
    assert_eq!(v["config"]["k"], 3);
    let bad = ws.text("bad.conf", "alpah = 2\n");
    let o = run(&[&"--config", &bad, &"score", &"--metric", &"novelsum", &"--embeddings", &data, &"--out", &out]);
    expect_exit(&o, 2);
}

/// Every check, by name.
pub const ALL: &[(&str, fn())] = &[
    ("score_novelsum", score_novelsum),
    ("score_ldd_duplicates", score_ldd_duplicates),
    ("score_baselines", score_baselines),
    ("score_ttr", score_ttr),
    ("score_input_errors", score_input_errors),
    ("select_novelselect", select_novelselect),
    ("select_duplicate", select_duplicate),
    ("select_reprfilter_exhausted", select_reprfilter_exhausted),
    ("select_budget_too_large", select_budget_too_large),
    ("simulate_single_seed", simulate_single_seed),
    ("simulate_seed_range", simulate_seed_range),
    ("simulate_needs_output", simulate_needs_output),
    ("correlate_ranking", correlate_ranking),
    ("correlate_aggregate_with_neg_inf", correlate_aggregate_with_neg_inf),
    ("correlate_too_few_rows", correlate_too_few_rows),
    ("config_file_precedence", config_file_precedence),
];

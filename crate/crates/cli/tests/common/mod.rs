#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn lookalike(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lookalike"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(args: &[&str]) -> Output {
    let out = lookalike(args);
    assert!(
        out.status.success(),
        "lookalike {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Runs gen -> tasks -> simulate -> filter -> mine -> train -> evaluate -> bin-analysis
/// into `dir` and returns every file written.
pub fn pipeline(dir: &Path, seed: u64, epochs: usize) -> Vec<PathBuf> {
    let seed = seed.to_string();
    let epochs = epochs.to_string();
    let p = |name: &str| dir.join(name);
    let sd = ["--seed", seed.as_str()];
    let run = |args: &[&str]| {
        let mut all = args.to_vec();
        all.extend_from_slice(&sd);
        ok(&all);
    };
    run(&[
        "gen-synthetic",
        "--n-items", "200",
        "--dim", "16",
        "--n-identities", "100",
        "--out-embeddings", s(&p("emb.jsonl")),
        "--out-metric", s(&p("metric.json")),
    ]);
    run(&[
        "build-tasks",
        "--embeddings", s(&p("emb.jsonl")),
        "--out-dir", s(&p("split")),
        "--n-train", "80",
        "--n-test", "30",
    ]);
    for part in ["train", "test"] {
        let emb = p(&format!("split/{part}_embeddings.jsonl"));
        let tasks = p(&format!("split/{part}_tasks.jsonl"));
        run(&[
            "simulate-workers",
            "--embeddings", s(&emb),
            "--tasks", s(&tasks),
            "--metric", s(&p("metric.json")),
            "--out", s(&p(&format!("{part}_raw.jsonl"))),
        ]);
        run(&[
            "filter-workers",
            "--tasks", s(&tasks),
            "--rankings", s(&p(&format!("{part}_raw.jsonl"))),
            "--out", s(&p(&format!("{part}_rankings.jsonl"))),
        ]);
        run(&[
            "mine-triplets",
            "--tasks", s(&tasks),
            "--rankings", s(&p(&format!("{part}_rankings.jsonl"))),
            "--out-triplets", s(&p(&format!("{part}_triplets.jsonl"))),
            "--out-aggregated", s(&p(&format!("{part}_aggregated.jsonl"))),
        ]);
    }
    run(&[
        "train",
        "--embeddings", s(&p("split/train_embeddings.jsonl")),
        "--triplets", s(&p("train_triplets.jsonl")),
        "--tasks", s(&p("split/train_tasks.jsonl")),
        "--epochs", epochs.as_str(),
        "--out-head", s(&p("head.json")),
        "--out-loss", s(&p("loss.csv")),
    ]);
    let (emb, tasks, rankings) = (
        p("split/test_embeddings.jsonl"),
        p("split/test_tasks.jsonl"),
        p("test_rankings.jsonl"),
    );
    for (name, head) in [("eval_trained", Some(p("head.json"))), ("eval_identity", None)] {
        let out = p(name);
        let mut args = vec![
            "evaluate",
            "--embeddings", s(&emb),
            "--tasks", s(&tasks),
            "--rankings", s(&rankings),
            "--out-dir", s(&out),
        ];
        if let Some(h) = &head {
            args.extend_from_slice(&["--head", s(h)]);
        }
        run(&args);
    }
    run(&[
        "bin-analysis",
        "--embeddings", s(&p("emb.jsonl")),
        "--n-bins", "5",
        "--per-cell", "20",
        "--noise", "0.2",
        "--out-dir", s(&p("bins")),
    ]);
    let mut files: Vec<PathBuf> = walk(dir);
    files.sort();
    files
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(walk(&path));
        } else {
            out.push(path);
        }
    }
    out
}

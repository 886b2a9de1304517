mod common;

use std::fs;

use common::{lookalike, ok, pipeline};
use lookalike_core::evaluation::EvalReport;
use lookalike_core::synthetic::GroundTruthMetric;
use lookalike_core::{jsonl, ProjectionHead, RankingTask, Triplet, WorkerRanking};

#[test]
fn full_pipeline_emits_reports() {
    let dir = tempfile::tempdir().unwrap();
    let files = pipeline(dir.path(), 3, 5);
    let names: Vec<String> = files
        .iter()
        .map(|f| f.strip_prefix(dir.path()).unwrap().display().to_string())
        .collect();
    for want in [
        "emb.jsonl",
        "metric.json",
        "split/train_tasks.jsonl",
        "split/test_embeddings.jsonl",
        "train_triplets.jsonl",
        "head.json",
        "loss.csv",
        "eval_trained/report.json",
        "eval_trained/confidence.csv",
        "eval_identity/precision.csv",
        "bins/matrix.csv",
        "bins/summary.json",
        "bins/votes.jsonl",
    ] {
        assert!(names.iter().any(|n| n == want), "missing {want} in {names:?}");
    }
    let report: EvalReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval_trained/report.json")).unwrap())
            .unwrap();
    assert!(report.hard_count > 0);
    assert_eq!(report.hard_count, report.easy_count);
    let loss = fs::read_to_string(dir.path().join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 6);
    assert!(loss.starts_with("epoch,mean_loss\n"));
    let head = ProjectionHead::load(&dir.path().join("head.json")).unwrap();
    assert_eq!((head.d_in(), head.d_out()), (16, 16));
}

#[test]
fn oracle_head_scores_perfectly_on_noiseless_workers() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    ok(&["gen-synthetic", "--n-items", "120", "--dim", "8", "--n-identities", "60",
        "--out-embeddings", &p("emb.jsonl"), "--out-metric", &p("metric.json")]);
    ok(&["build-tasks", "--embeddings", &p("emb.jsonl"), "--out-dir", &p("s"),
        "--n-train", "20", "--n-test", "20"]);
    ok(&["simulate-workers", "--embeddings", &p("s/test_embeddings.jsonl"),
        "--tasks", &p("s/test_tasks.jsonl"), "--metric", &p("metric.json"),
        "--noise", "0", "--out", &p("r.jsonl")]);
    let metric = GroundTruthMetric::load(&dir.path().join("metric.json")).unwrap();
    metric.as_head().save(&dir.path().join("oracle.json")).unwrap();
    ok(&["evaluate", "--embeddings", &p("s/test_embeddings.jsonl"),
        "--tasks", &p("s/test_tasks.jsonl"), "--rankings", &p("r.jsonl"),
        "--head", &p("oracle.json"), "--out-dir", &p("eval")]);
    let report: EvalReport =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval/report.json")).unwrap()).unwrap();
    assert_eq!(report.hard_accuracy, 1.0);
    assert_eq!(report.mean_ndcg, 1.0);
    // 20 tasks, 15 unanimous pairs each
    assert_eq!(report.hard_count, 300);
}

#[test]
fn mined_triplets_follow_rankings() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), 1, 1);
    let tasks: Vec<RankingTask> = jsonl::read(&dir.path().join("split/train_tasks.jsonl")).unwrap();
    let rankings: Vec<WorkerRanking> = jsonl::read(&dir.path().join("train_rankings.jsonl")).unwrap();
    let triplets: Vec<Triplet> = jsonl::read(&dir.path().join("train_triplets.jsonl")).unwrap();
    assert_eq!(
        triplets,
        lookalike_core::aggregation::extract_all_hard_triplets(&tasks, &rankings).unwrap()
    );
    let raw: Vec<WorkerRanking> = jsonl::read(&dir.path().join("train_raw.jsonl")).unwrap();
    assert_eq!(raw.len(), tasks.len() * 10);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(lookalike(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(lookalike(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(lookalike(&["gen-synthetic"]).status.code(), Some(2));
    assert_eq!(lookalike(&["train", "--lr", "fast"]).status.code(), Some(2));
}

#[test]
fn validation_errors_exit_1_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    fs::write(
        dir.path().join("bad.jsonl"),
        "{\"item_id\":\"a\",\"identity\":\"x\",\"vector\":[1,0]}\n{\"item_id\":\"b\",\"identity\":\"y\",\"vector\":[1]}\n",
    )
    .unwrap();
    let out = lookalike(&["build-tasks", "--embeddings", &p("bad.jsonl"), "--out-dir", &p("o")]);
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("bad.jsonl:2:"), "{msg}");
    assert!(!dir.path().join("o").exists());

    ok(&["gen-synthetic", "--n-items", "40", "--dim", "4", "--n-identities", "20",
        "--out-embeddings", &p("e.jsonl"), "--out-metric", &p("m.json")]);
    ok(&["build-tasks", "--embeddings", &p("e.jsonl"), "--out-dir", &p("s"),
        "--n-train", "5", "--n-test", "5"]);
    let out = lookalike(&["train", "--embeddings", &p("e.jsonl"), "--triplets", &p("missing.jsonl"),
        "--tasks", &p("s/train_tasks.jsonl"), "--easy-prob", "1.5",
        "--out-head", &p("h.json"), "--out-loss", &p("l.csv")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("easy_prob"));
    assert!(!dir.path().join("h.json").exists());

    let out = lookalike(&["build-tasks", "--embeddings", &p("e.jsonl"), "--out-dir", &p("t"),
        "--n-test", "500"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("t").exists());

    let out = lookalike(&["bin-analysis", "--embeddings", &p("e.jsonl"), "--threshold", "0.4",
        "--out-dir", &p("b")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("b").exists());
}

#[test]
fn inputs_are_not_modified() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path(), 2, 1);
    let before = fs::read(dir.path().join("train_raw.jsonl")).unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    ok(&["filter-workers", "--tasks", &p("split/train_tasks.jsonl"),
        "--rankings", &p("train_raw.jsonl"), "--min-rearranged", "3", "--out", &p("f.jsonl")]);
    assert_eq!(fs::read(dir.path().join("train_raw.jsonl")).unwrap(), before);
}

#[test]
fn train_help_lists_defaults() {
    let help = String::from_utf8(ok(&["train", "--help"]).stdout).unwrap();
    for want in [
        "[default: 0.05]",
        "[default: 0.0001]",
        "[default: 32]",
        "[default: 0.5]",
        "--seed",
        "--no-output-norm",
    ] {
        assert!(help.contains(want), "train --help lacks {want}:\n{help}");
    }
    let top = String::from_utf8(ok(&["--help"]).stdout).unwrap();
    for cmd in [
        "gen-synthetic", "build-tasks", "simulate-workers", "filter-workers",
        "mine-triplets", "train", "evaluate", "bin-analysis", "serve",
    ] {
        assert!(top.contains(cmd), "{cmd} missing from --help");
    }
}

#[test]
fn bin_analysis_with_collected_votes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_str().unwrap().to_string();
    ok(&["gen-synthetic", "--n-items", "60", "--dim", "4", "--n-identities", "30",
        "--out-embeddings", &p("e.jsonl"), "--out-metric", &p("m.json")]);
    ok(&["bin-analysis", "--embeddings", &p("e.jsonl"), "--n-bins", "4", "--per-cell", "10",
        "--out-dir", &p("sim")]);
    // feeding the simulated votes back in reproduces the same matrix
    ok(&["bin-analysis", "--embeddings", &p("e.jsonl"), "--n-bins", "4", "--per-cell", "10",
        "--votes", &p("sim/votes.jsonl"), "--out-dir", &p("real")]);
    assert_eq!(
        fs::read(dir.path().join("sim/matrix.csv")).unwrap(),
        fs::read(dir.path().join("real/matrix.csv")).unwrap()
    );
    assert!(!dir.path().join("real/votes.jsonl").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("sim/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_tasks"], 60);
    assert_eq!(summary["triangle_accuracy"], 1.0);
}

//! Small browser demos over `lookalike-core`.
//!
//! Every export takes plain numbers or slices and returns a number or a JSON
//! string, so the same functions run natively in tests.

use lookalike_core::benchmark::{Benchmark, BenchmarkConfig};
use lookalike_core::binning::{
    aggregate_pair_votes, bin_pairs, build_pair_comparison_tasks, quantile_edges, triangle_accuracy,
};
use lookalike_core::evaluation::{evaluate, ndcg6, RelevanceProfile};
use lookalike_core::synthetic::{simulate_pair_votes, WorkerModel};
use lookalike_core::{seed, train, ProjectionHead, TrainConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// NDCG of a model ordering.
///
/// `relevance[i]` is the graded relevance of candidate `i`; `order` lists
/// candidate indices, nearest first.
#[wasm_bindgen]
pub fn ndcg(relevance: &[f64], order: &[u32]) -> Result<f64, String> {
    let name = |i: usize| format!("c{i}");
    let names: Vec<String> = (0..relevance.len()).map(name).collect();
    let profile = RelevanceProfile::from_pairs(names.iter().map(String::as_str).zip(relevance.iter().copied()));
    let model: Vec<String> = order
        .iter()
        .map(|&i| {
            let i = i as usize;
            if i < relevance.len() {
                Ok(name(i))
            } else {
                Err(format!("candidate index {i} out of range"))
            }
        })
        .collect::<Result<_, _>>()?;
    let mut seen = vec![false; relevance.len()];
    for &i in order {
        if std::mem::replace(&mut seen[i as usize], true) {
            return Err(format!("candidate {i} listed twice"));
        }
    }
    ndcg6(&model, &profile).map_err(err)
}

#[derive(Serialize)]
struct Scores {
    hard: f64,
    easy: f64,
    ndcg: f64,
}

#[derive(Serialize)]
struct TrainDemo {
    train_triplets: usize,
    test_triplets: usize,
    loss: Vec<f64>,
    identity: Scores,
    trained: Scores,
}

/// Builds a small synthetic benchmark, trains a head on it and reports
/// held-out accuracy before and after training.
#[wasm_bindgen]
pub fn train_demo(seed: u32, epochs: u32, noise: f64, learning_rate: f64) -> Result<String, String> {
    if epochs > 500 {
        return Err("at most 500 epochs in the demo".into());
    }
    let b = Benchmark::build(&BenchmarkConfig {
        n_items: 200,
        dim: 16,
        n_identities: 100,
        train_tasks: 100,
        test_tasks: 30,
        noise_sigma: noise,
        seed: seed as u64,
        ..BenchmarkConfig::default()
    })
    .map_err(err)?;
    let cfg = TrainConfig {
        epochs: epochs as usize,
        learning_rate,
        seed: seed::derive(seed as u64, "train"),
        ..TrainConfig::default()
    };
    let out = train(&b.train.set, &b.train.hard, &b.train.tasks, &cfg).map_err(err)?;
    let score = |head: &ProjectionHead| -> Result<Scores, String> {
        let r = evaluate(head, &b.test.set, &b.test.hard, &b.test_easy, &b.test.aggregated).map_err(err)?;
        Ok(Scores {
            hard: r.hard_accuracy,
            easy: r.easy_accuracy,
            ndcg: r.mean_ndcg,
        })
    };
    let demo = TrainDemo {
        train_triplets: b.train.hard.len(),
        test_triplets: b.test.hard.len(),
        loss: out.loss_curve.clone(),
        identity: score(&ProjectionHead::identity(b.test.set.dim(), true))?,
        trained: score(&out.head)?,
    };
    serde_json::to_string(&demo).map_err(err)
}

#[derive(Serialize)]
struct BinDemo {
    edges: Vec<f64>,
    counts: Vec<Vec<u64>>,
    tasks_per_cell: u64,
    triangle_accuracy: Option<f64>,
}

/// Pair-of-pairs experiment on synthetic faces with simulated voters that
/// judge by base distance plus Gaussian noise.
#[wasm_bindgen]
pub fn bin_demo(seed: u32, n_bins: u32, per_cell: u32, noise: f64, threshold: f64) -> Result<String, String> {
    if !(threshold > 0.5 && threshold <= 1.0) {
        return Err(format!("threshold {threshold} outside (0.5, 1]"));
    }
    if !(2..=12).contains(&n_bins) || !(1..=200).contains(&per_cell) {
        return Err("use 2 to 12 bins and 1 to 200 tasks per cell".into());
    }
    let master = seed as u64;
    let set = lookalike_core::synthetic::gen_embeddings(200, 16, 100, seed::derive(master, "items"))
        .map_err(err)?;
    let edges = quantile_edges(&set, n_bins as usize).map_err(err)?;
    let binned = bin_pairs(&set, &edges).map_err(err)?;
    let tasks = build_pair_comparison_tasks(&binned, per_cell as usize, seed::derive(master, "pair-tasks"))
        .map_err(err)?;
    let workers = WorkerModel::pool(10, noise, seed::derive(master, "voters")).map_err(err)?;
    let votes = simulate_pair_votes(&tasks, &set, None, &workers).map_err(err)?;
    let matrix = aggregate_pair_votes(&tasks, &votes, threshold, &edges).map_err(err)?;
    let bins: Vec<usize> = (0..matrix.n_bins()).collect();
    let demo = BinDemo {
        triangle_accuracy: triangle_accuracy(&matrix, &bins).ok(),
        edges: matrix.edges,
        counts: matrix.counts,
        tasks_per_cell: matrix.tasks_per_cell,
    };
    serde_json::to_string(&demo).map_err(err)
}

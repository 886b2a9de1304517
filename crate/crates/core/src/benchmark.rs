//! End-to-end synthetic benchmark: generate items and a hidden metric, split by
//! identity, build tasks, simulate workers, filter, and mine triplets for both
//! the training and the held-out split.

use serde::{Deserialize, Serialize};

use crate::aggregation::{
    aggregate_all, extract_all_hard_triplets, filter_lazy_workers, AggregatedTask, EasySampler,
    Triplet, WorkerRanking, DEFAULT_MIN_REARRANGED,
};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::seed;
use crate::synthetic::{gen_embeddings, simulate_rankings, GroundTruthMetric, WorkerModel};
use crate::tasks::{build_ranking_tasks, sample_queries, split_by_identity, RankingTask};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n_items: usize,
    pub dim: usize,
    /// Output dimension of the hidden perceptual metric.
    pub metric_dim: usize,
    pub n_identities: usize,
    pub holdout_fraction: f64,
    pub train_tasks: usize,
    pub test_tasks: usize,
    pub n_candidates: usize,
    pub n_workers: usize,
    pub noise_sigma: f64,
    pub min_rearranged: f64,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_items: 600,
            dim: 32,
            metric_dim: 4,
            n_identities: 300,
            holdout_fraction: 0.2,
            train_tasks: 400,
            test_tasks: 100,
            n_candidates: 6,
            n_workers: 10,
            noise_sigma: 0.3,
            min_rearranged: DEFAULT_MIN_REARRANGED,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub set: EmbeddingSet,
    pub tasks: Vec<RankingTask>,
    pub rankings: Vec<WorkerRanking>,
    pub aggregated: Vec<AggregatedTask>,
    pub hard: Vec<Triplet>,
}

#[derive(Debug, Clone)]
pub struct Benchmark {
    pub config: BenchmarkConfig,
    pub full: EmbeddingSet,
    pub metric: GroundTruthMetric,
    pub train: Split,
    pub test: Split,
    /// Held-out easy triplets, as many as there are held-out hard triplets.
    pub test_easy: Vec<Triplet>,
}

fn build_split(
    set: EmbeddingSet,
    n_tasks: usize,
    cfg: &BenchmarkConfig,
    metric: &GroundTruthMetric,
    workers: &[WorkerModel],
    label: &str,
) -> Result<Split> {
    if n_tasks > set.len() {
        return Err(Error::validation(format!(
            "{label} split has {} items, cannot host {n_tasks} tasks",
            set.len()
        )));
    }
    let queries = sample_queries(&set, n_tasks, seed::derive(cfg.seed, &format!("{label}-queries")));
    let tasks = build_ranking_tasks(
        &set,
        &queries,
        cfg.n_candidates,
        seed::derive(cfg.seed, &format!("{label}-tasks")),
    )?;
    let raw = simulate_rankings(&tasks, &set, metric, workers)?;
    let rankings = filter_lazy_workers(&raw, &tasks, cfg.min_rearranged)?;
    let aggregated = aggregate_all(&tasks, &rankings);
    let hard = extract_all_hard_triplets(&tasks, &rankings)?;
    Ok(Split {
        set,
        tasks,
        rankings,
        aggregated,
        hard,
    })
}

impl Benchmark {
    pub fn build(cfg: &BenchmarkConfig) -> Result<Self> {
        let full = gen_embeddings(cfg.n_items, cfg.dim, cfg.n_identities, seed::derive(cfg.seed, "items"))?;
        let metric = GroundTruthMetric::random(cfg.dim, cfg.metric_dim, seed::derive(cfg.seed, "metric"))?;
        let workers = WorkerModel::pool(cfg.n_workers, cfg.noise_sigma, seed::derive(cfg.seed, "workers"))?;
        let (train_set, test_set) =
            split_by_identity(&full, cfg.holdout_fraction, seed::derive(cfg.seed, "split"))?;
        let train = build_split(train_set, cfg.train_tasks, cfg, &metric, &workers, "train")?;
        let test = build_split(test_set, cfg.test_tasks, cfg, &metric, &workers, "test")?;
        let sampler = EasySampler::new(&test.tasks, &test.set)?;
        let mut rng = seed::rng(seed::derive(cfg.seed, "test-easy"));
        let test_easy = (0..test.hard.len()).map(|_| sampler.sample(&mut rng)).collect();
        Ok(Self {
            config: cfg.clone(),
            full,
            metric,
            train,
            test,
            test_easy,
        })
    }
}

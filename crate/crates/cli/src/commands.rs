use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;

use lookalike_core::aggregation::{
    aggregate_all, extract_all_hard_triplets, filter_lazy_workers, EasySampler,
};
use lookalike_core::binning::{
    aggregate_pair_votes, bin_pairs, build_pair_comparison_tasks, quantile_edges,
    triangle_accuracy, PairOfPairsTask, PairVote,
};
use lookalike_core::embedding::load_embeddings;
use lookalike_core::evaluation::evaluate;
use lookalike_core::synthetic::{
    gen_embeddings, simulate_pair_votes, simulate_rankings, GroundTruthMetric, WorkerModel,
};
use lookalike_core::tasks::{build_ranking_tasks, sample_queries, split_by_identity};
use lookalike_core::{
    jsonl, seed, train, EmbeddingSet, Error, ProjectionHead, RankingTask, TrainConfig, Triplet,
    WorkerRanking,
};
use lookalike_service::ServiceConfig;

use crate::{
    BinAnalysis, BuildTasks, Cli, Command, Evaluate, FilterWorkers, GenSynthetic, MineTriplets,
    Serve, SimulateWorkers, Train,
};

pub fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        normalize: !cli.no_normalize,
    };
    match cli.command {
        Command::GenSynthetic(a) => gen_synthetic(&ctx, a),
        Command::BuildTasks(a) => build_tasks(&ctx, a),
        Command::SimulateWorkers(a) => simulate_workers(&ctx, a),
        Command::FilterWorkers(a) => filter_workers(a),
        Command::MineTriplets(a) => mine_triplets(a),
        Command::Train(a) => train_head(&ctx, a),
        Command::Evaluate(a) => evaluate_head(&ctx, a),
        Command::BinAnalysis(a) => bin_analysis(&ctx, a),
        Command::Serve(a) => serve(&ctx, a),
    }
}

struct Ctx {
    seed: u64,
    normalize: bool,
}

impl Ctx {
    fn embeddings(&self, path: &Path) -> Result<EmbeddingSet> {
        load_embeddings(path, self.normalize)
            .with_context(|| format!("loading embeddings from {}", path.display()))
    }

    fn derive(&self, key: &str) -> u64 {
        seed::derive(self.seed, key)
    }
}

fn read<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<Vec<T>> {
    jsonl::read(path).with_context(|| format!("reading {what} from {}", path.display()))
}

fn tasks_file(path: &Path) -> Result<Vec<RankingTask>> {
    let tasks: Vec<RankingTask> = read(path, "tasks")?;
    for t in &tasks {
        t.validate()?;
    }
    Ok(tasks)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn make_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn metric_or_base(path: Option<&PathBuf>, set: &EmbeddingSet) -> Result<GroundTruthMetric> {
    match path {
        Some(p) => {
            let m = GroundTruthMetric::load(p)?;
            ensure!(
                m.d_in == set.dim(),
                "metric expects {}-dimensional items, embeddings have {}",
                m.d_in,
                set.dim()
            );
            Ok(m)
        }
        None => Ok(GroundTruthMetric::identity(set.dim())),
    }
}

fn gen_synthetic(ctx: &Ctx, a: GenSynthetic) -> Result<()> {
    let set = gen_embeddings(a.n_items, a.dim, a.n_identities, ctx.derive("items"))?;
    let metric = GroundTruthMetric::random(a.dim, a.metric_dim, ctx.derive("metric"))?;
    set.save(&a.out_embeddings)?;
    metric.save(&a.out_metric)?;
    Ok(())
}

fn build_tasks(ctx: &Ctx, a: BuildTasks) -> Result<()> {
    let set = ctx.embeddings(&a.embeddings)?;
    let (train, test) = split_by_identity(&set, a.holdout_fraction, ctx.derive("split"))?;
    let mut out = Vec::new();
    for (label, part, n) in [("train", &train, a.n_train), ("test", &test, a.n_test)] {
        ensure!(
            n <= part.len(),
            "{label} split has {} items, cannot host {n} tasks",
            part.len()
        );
        let queries = sample_queries(part, n, ctx.derive(&format!("{label}-queries")));
        let tasks = build_ranking_tasks(
            part,
            &queries,
            a.n_candidates,
            ctx.derive(&format!("{label}-tasks")),
        )?;
        out.push((label, part, tasks));
    }
    make_dir(&a.out_dir)?;
    for (label, part, tasks) in out {
        part.save(&a.out_dir.join(format!("{label}_embeddings.jsonl")))?;
        jsonl::write(&a.out_dir.join(format!("{label}_tasks.jsonl")), &tasks)?;
    }
    Ok(())
}

fn simulate_workers(ctx: &Ctx, a: SimulateWorkers) -> Result<()> {
    let set = ctx.embeddings(&a.embeddings)?;
    let tasks = tasks_file(&a.tasks)?;
    let metric = metric_or_base(a.metric.as_ref(), &set)?;
    let workers = WorkerModel::pool(a.n_workers, a.noise, ctx.derive("workers"))?;
    let rankings = simulate_rankings(&tasks, &set, &metric, &workers)?;
    jsonl::write(&a.out, &rankings)?;
    Ok(())
}

fn filter_workers(a: FilterWorkers) -> Result<()> {
    let tasks = tasks_file(&a.tasks)?;
    let rankings: Vec<WorkerRanking> = read(&a.rankings, "rankings")?;
    let kept = filter_lazy_workers(&rankings, &tasks, a.min_rearranged)?;
    eprintln!("kept {} of {} rankings", kept.len(), rankings.len());
    jsonl::write(&a.out, &kept)?;
    Ok(())
}

fn mine_triplets(a: MineTriplets) -> Result<()> {
    let tasks = tasks_file(&a.tasks)?;
    let rankings: Vec<WorkerRanking> = read(&a.rankings, "rankings")?;
    let hard = extract_all_hard_triplets(&tasks, &rankings)?;
    let aggregated = aggregate_all(&tasks, &rankings);
    jsonl::write(&a.out_triplets, &hard)?;
    jsonl::write(&a.out_aggregated, &aggregated)?;
    Ok(())
}

fn train_head(ctx: &Ctx, a: Train) -> Result<()> {
    let config = TrainConfig {
        alpha: a.alpha,
        learning_rate: a.lr,
        batch_size: a.batch_size,
        easy_prob: a.easy_prob,
        epochs: a.epochs,
        seed: ctx.seed,
        d_out: a.d_out,
        normalize_output: !a.no_output_norm,
        init_noise: a.init_noise,
        ..TrainConfig::default()
    };
    config.validate()?;
    let set = ctx.embeddings(&a.embeddings)?;
    let hard: Vec<Triplet> = read(&a.triplets, "triplets")?;
    let tasks = tasks_file(&a.tasks)?;
    let outcome = train(&set, &hard, &tasks, &config)?;
    outcome.head.save(&a.out_head)?;
    write_text(&a.out_loss, &outcome.loss_csv())
}

fn evaluate_head(ctx: &Ctx, a: Evaluate) -> Result<()> {
    let set = ctx.embeddings(&a.embeddings)?;
    let tasks = tasks_file(&a.tasks)?;
    let rankings: Vec<WorkerRanking> = read(&a.rankings, "rankings")?;
    let head = match &a.head {
        Some(p) => ProjectionHead::load(p)?,
        None => ProjectionHead::identity(set.dim(), false),
    };
    ensure!(
        head.d_in() == set.dim(),
        "head expects {}-dimensional input, embeddings have {}",
        head.d_in(),
        set.dim()
    );
    let hard = extract_all_hard_triplets(&tasks, &rankings)?;
    let aggregated = aggregate_all(&tasks, &rankings);
    let sampler = EasySampler::new(&tasks, &set)?;
    let mut rng = seed::rng(ctx.derive("test-easy"));
    let easy: Vec<Triplet> = (0..hard.len()).map(|_| sampler.sample(&mut rng)).collect();
    let report = evaluate(&head, &set, &hard, &easy, &aggregated)?;
    make_dir(&a.out_dir)?;
    write_json(&a.out_dir.join("report.json"), &report)?;
    write_text(&a.out_dir.join("accuracy.csv"), &report.accuracy_csv())?;
    write_text(&a.out_dir.join("confidence.csv"), &report.confidence_csv())?;
    write_text(&a.out_dir.join("precision.csv"), &report.precision_csv())
}

#[derive(Serialize)]
struct BinSummary {
    edges: Vec<f64>,
    n_tasks: usize,
    tasks_per_cell: u64,
    triangle_bins: Vec<usize>,
    /// `None` when no comparison among the chosen bins reached the threshold.
    triangle_accuracy: Option<f64>,
    counted_per_cell: BTreeMap<String, u64>,
}

fn bin_analysis(ctx: &Ctx, a: BinAnalysis) -> Result<()> {
    ensure!(
        a.threshold > 0.5 && a.threshold <= 1.0,
        "threshold {} outside (0.5, 1]",
        a.threshold
    );
    let set = ctx.embeddings(&a.embeddings)?;
    let edges = match &a.edges {
        Some(e) => e.clone(),
        None => quantile_edges(&set, a.n_bins)?,
    };
    let n_bins = edges.len().saturating_sub(1);
    let bins = a.triangle_bins.clone().unwrap_or_else(|| (0..n_bins).collect());
    let binned = bin_pairs(&set, &edges)?;
    let tasks: Vec<PairOfPairsTask> =
        build_pair_comparison_tasks(&binned, a.per_cell, ctx.derive("pair-tasks"))?;
    let (votes, simulated) = match &a.votes {
        Some(p) => (read::<PairVote>(p, "votes")?, false),
        None => {
            let metric = match &a.metric {
                Some(_) => Some(metric_or_base(a.metric.as_ref(), &set)?),
                None => None,
            };
            let workers = WorkerModel::pool(a.n_workers, a.noise, ctx.derive("voters"))?;
            (simulate_pair_votes(&tasks, &set, metric.as_ref(), &workers)?, true)
        }
    };
    let matrix = aggregate_pair_votes(&tasks, &votes, a.threshold, &edges)?;
    matrix.check_invariants()?;
    let tri = match triangle_accuracy(&matrix, &bins) {
        Ok(t) => Some(t),
        Err(Error::Undefined(_)) => None,
        Err(e) => bail!(e),
    };
    let mut counted = BTreeMap::new();
    for (i, row) in matrix.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if i != j {
                counted.insert(format!("{i:02}-{j:02}"), c);
            }
        }
    }
    make_dir(&a.out_dir)?;
    jsonl::write(&a.out_dir.join("pair_tasks.jsonl"), &tasks)?;
    if simulated {
        jsonl::write(&a.out_dir.join("votes.jsonl"), &votes)?;
    }
    write_text(&a.out_dir.join("matrix.csv"), &matrix.to_csv())?;
    write_json(
        &a.out_dir.join("summary.json"),
        &BinSummary {
            edges,
            n_tasks: tasks.len(),
            tasks_per_cell: matrix.tasks_per_cell,
            triangle_bins: bins,
            triangle_accuracy: tri,
            counted_per_cell: counted,
        },
    )
}

fn serve(ctx: &Ctx, a: Serve) -> Result<()> {
    ensure!(a.quota > 0, "quota must be at least 1");
    let config = ServiceConfig {
        listen: a.listen,
        embeddings: a.embeddings,
        normalize: ctx.normalize,
        head: a.head,
        tasks: a.tasks,
        rankings: a.rankings,
        static_dir: a.static_dir,
        quota: a.quota,
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(lookalike_service::serve(config))?;
    Ok(())
}

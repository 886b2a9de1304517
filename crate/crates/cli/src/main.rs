use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "lookalike", version, about = "Perceptual lookalike embeddings from crowd rankings")]
pub struct Cli {
    /// Master seed; every stage is deterministic under it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Use embedding vectors as stored instead of scaling them to unit length.
    #[arg(long, global = true)]
    pub no_normalize: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Random unit-vector items plus a hidden linear perceptual metric.
    GenSynthetic(GenSynthetic),
    /// Identity-disjoint train/test split and six-candidate ranking tasks.
    BuildTasks(BuildTasks),
    /// Simulated workers ranking every task by noisy hidden-metric distance.
    SimulateWorkers(SimulateWorkers),
    /// Drops every ranking of workers who barely reorder the candidates.
    FilterWorkers(FilterWorkers),
    /// Average positions and majority-oriented hard triplets.
    MineTriplets(MineTriplets),
    /// Fits a projection head with the triplet hinge loss.
    Train(Train),
    /// Held-out triplet accuracy, confidence bins, precision@k and NDCG.
    Evaluate(Evaluate),
    /// Distance-bin pair-of-pairs analysis and triangle accuracy.
    BinAnalysis(BinAnalysis),
    /// HTTP service for retrieval and ranking collection.
    Serve(Serve),
}

#[derive(Debug, Args)]
pub struct GenSynthetic {
    #[arg(long, default_value_t = 600)]
    pub n_items: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 300)]
    pub n_identities: usize,
    /// Output dimension of the hidden metric.
    #[arg(long, default_value_t = 4)]
    pub metric_dim: usize,
    #[arg(long)]
    pub out_embeddings: PathBuf,
    #[arg(long)]
    pub out_metric: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildTasks {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Receives {train,test}_embeddings.jsonl and {train,test}_tasks.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub n_train: usize,
    #[arg(long, default_value_t = 100)]
    pub n_test: usize,
    /// Share of identities held out for testing.
    #[arg(long, default_value_t = 0.2)]
    pub holdout_fraction: f64,
    #[arg(long, default_value_t = 6)]
    pub n_candidates: usize,
}

#[derive(Debug, Args)]
pub struct SimulateWorkers {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub tasks: PathBuf,
    /// Hidden metric; plain base distance when omitted.
    #[arg(long)]
    pub metric: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub n_workers: usize,
    #[arg(long, default_value_t = 0.3)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FilterWorkers {
    #[arg(long)]
    pub tasks: PathBuf,
    #[arg(long)]
    pub rankings: PathBuf,
    /// Workers whose mean rearranged count is below this are dropped.
    #[arg(long, default_value_t = 1.5)]
    pub min_rearranged: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MineTriplets {
    #[arg(long)]
    pub tasks: PathBuf,
    #[arg(long)]
    pub rankings: PathBuf,
    #[arg(long)]
    pub out_triplets: PathBuf,
    #[arg(long)]
    pub out_aggregated: PathBuf,
}

#[derive(Debug, Args)]
pub struct Train {
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Hard triplets from mine-triplets.
    #[arg(long)]
    pub triplets: PathBuf,
    /// Ranking tasks, used to sample easy triplets.
    #[arg(long)]
    pub tasks: PathBuf,
    #[arg(long)]
    pub out_head: PathBuf,
    #[arg(long)]
    pub out_loss: PathBuf,
    /// Triplet margin.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// Probability a batch slot holds an easy triplet.
    #[arg(long, default_value_t = 0.5)]
    pub easy_prob: f64,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Output dimension of the head; defaults to the input dimension.
    #[arg(long)]
    pub d_out: Option<usize>,
    /// Skip unit normalization of the head output.
    #[arg(long)]
    pub no_output_norm: bool,
    /// Standard deviation of the noise added to the identity initialization.
    #[arg(long, default_value_t = 1e-3)]
    pub init_noise: f64,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub tasks: PathBuf,
    /// Filtered held-out rankings.
    #[arg(long)]
    pub rankings: PathBuf,
    /// Head to evaluate; the identity head when omitted.
    #[arg(long)]
    pub head: Option<PathBuf>,
    /// Receives report.json, accuracy.csv, confidence.csv and precision.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct BinAnalysis {
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub n_bins: usize,
    /// Explicit comma-separated bin edges instead of equal-count quantiles.
    #[arg(long, value_delimiter = ',')]
    pub edges: Option<Vec<f64>>,
    /// Tasks per pair of bins.
    #[arg(long, default_value_t = 100)]
    pub per_cell: usize,
    /// Collected votes; simulated voters are used when omitted.
    #[arg(long)]
    pub votes: Option<PathBuf>,
    /// Hidden metric driving simulated voters; base distance when omitted.
    #[arg(long)]
    pub metric: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub n_workers: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Minimum winning vote share for a task to count.
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
    /// Bins included in triangle accuracy; all bins when omitted.
    #[arg(long, value_delimiter = ',')]
    pub triangle_bins: Option<Vec<usize>>,
    /// Receives pair_tasks.jsonl, votes.jsonl (simulated), matrix.csv and summary.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct Serve {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub listen: SocketAddr,
    #[arg(long)]
    pub embeddings: PathBuf,
    #[arg(long)]
    pub head: Option<PathBuf>,
    #[arg(long)]
    pub tasks: PathBuf,
    /// Append-only rankings file; created if missing.
    #[arg(long)]
    pub rankings: PathBuf,
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Most tasks handed to one worker.
    #[arg(long, default_value_t = 10)]
    pub quota: usize,
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

//! Learning a perceptual face-similarity embedding from crowd rankings.
//!
//! The pipeline runs over precomputed base face embeddings:
//!
//! - [`embedding`]: load, validate and search base embeddings.
//! - [`binning`]: measure how well base distance predicts perceived similarity
//!   using distance bins and pair-of-pairs votes.
//! - [`tasks`] and [`aggregation`]: build six-candidate ranking tasks, filter
//!   lazy workers and mine confidence-weighted triplets.
//! - [`trainer`]: fit a projection head with the triplet hinge loss and Adam.
//! - [`evaluation`]: triplet accuracy, confidence bins, precision@k, NDCG,
//!   win rate, ROC-AUC and attribute Hamming distance.
//! - [`synthetic`] and [`benchmark`]: simulated items, metric and workers for
//!   running everything end to end without human data.

pub mod adam;
pub mod aggregation;
pub mod benchmark;
pub mod binning;
pub mod embedding;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod head;
pub mod jsonl;
pub mod loss;
pub mod seed;
pub mod synthetic;
pub mod tasks;
pub mod trainer;

pub use aggregation::{AggregatedTask, Triplet, TripletKind, WorkerRanking};
pub use embedding::{EmbeddingRecord, EmbeddingSet, Neighbor};
pub use error::{Error, Result};
pub use head::ProjectionHead;
pub use tasks::RankingTask;
pub use trainer::{train, TrainConfig, TrainOutcome};

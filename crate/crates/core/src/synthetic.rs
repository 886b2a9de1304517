//! Synthetic stand-ins for faces and annotators.
//!
//! Items are random unit vectors; "perceived" similarity is Euclidean distance
//! after a hidden random linear map; each simulated worker ranks by that
//! distance plus Gaussian noise drawn per (worker, task, candidate).

use std::path::Path;

use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::aggregation::WorkerRanking;
use crate::binning::{Choice, PairOfPairsTask, PairVote};
use crate::embedding::{EmbeddingRecord, EmbeddingSet};
use crate::error::{Error, Result};
use crate::head::ProjectionHead;
use crate::seed;
use crate::tasks::RankingTask;

/// Hidden perceptual metric: distance after applying `transform` (row-major `d_out x d_in`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMetric {
    pub d_in: usize,
    pub d_out: usize,
    pub transform: Vec<f64>,
}

impl GroundTruthMetric {
    /// Gaussian entries scaled by `1/sqrt(d_out)`, redrawn until full row rank.
    ///
    /// The scaling keeps `E|Tu|^2 = |u|^2`, so perceived distances stay on the
    /// same scale as base distances whatever the output dimension.
    pub fn random(d_in: usize, d_out: usize, seed: u64) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::validation("metric dimensions must be positive"));
        }
        let mut rng = seed::rng(seed);
        let scale = 1.0 / (d_out as f64).sqrt();
        for _ in 0..100 {
            let transform: Vec<f64> = (0..d_in * d_out)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * scale
                })
                .collect();
            if rank(&transform, d_out, d_in) == d_out.min(d_in) {
                return Ok(Self {
                    d_in,
                    d_out,
                    transform,
                });
            }
        }
        Err(Error::validation("could not draw a full-rank transform"))
    }

    pub fn identity(d: usize) -> Self {
        let mut transform = vec![0.0; d * d];
        for i in 0..d {
            transform[i * d + i] = 1.0;
        }
        Self {
            d_in: d,
            d_out: d,
            transform,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.transform
            .chunks_exact(self.d_in)
            .map(|row| row.iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        self.apply(&diff).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// The metric as an un-normalized projection head (the oracle head).
    pub fn as_head(&self) -> ProjectionHead {
        ProjectionHead::new(
            self.d_in,
            self.d_out,
            self.transform.clone(),
            vec![0.0; self.d_out],
            false,
        )
        .expect("metric dimensions are consistent")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).expect("metric serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self =
            serde_json::from_str(&text).map_err(|e| Error::validation(format!("metric file: {e}")))?;
        if m.transform.len() != m.d_in * m.d_out {
            return Err(Error::Dimension {
                expected: m.d_in * m.d_out,
                actual: m.transform.len(),
            });
        }
        Ok(m)
    }
}

fn rank(m: &[f64], rows: usize, cols: usize) -> usize {
    let mut a = m.to_vec();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let pivot = (r..rows)
            .max_by(|&i, &j| a[i * cols + c].abs().total_cmp(&a[j * cols + c].abs()))
            .unwrap();
        if a[pivot * cols + c].abs() < 1e-10 {
            continue;
        }
        for k in 0..cols {
            a.swap(r * cols + k, pivot * cols + k);
        }
        for i in r + 1..rows {
            let f = a[i * cols + c] / a[r * cols + c];
            for k in c..cols {
                a[i * cols + k] -= f * a[r * cols + k];
            }
        }
        r += 1;
    }
    r
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerModel {
    pub worker_id: String,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl WorkerModel {
    pub fn new(worker_id: impl Into<String>, noise_sigma: f64, seed: u64) -> Result<Self> {
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::validation("noise_sigma must be finite and non-negative"));
        }
        Ok(Self {
            worker_id: worker_id.into(),
            noise_sigma,
            seed,
        })
    }

    /// `n` workers `w00, w01, ...` with seeds derived from `master`.
    pub fn pool(n: usize, noise_sigma: f64, master: u64) -> Result<Vec<Self>> {
        (0..n)
            .map(|i| {
                let id = format!("w{i:02}");
                let s = seed::derive(master, &id);
                Self::new(id, noise_sigma, s)
            })
            .collect()
    }

    fn noise(&self, key: &str) -> (seed::Rng, Normal<f64>) {
        let rng = seed::rng(seed::derive(self.seed, key));
        // sigma validated at construction
        (rng, Normal::new(0.0, self.noise_sigma).expect("valid sigma"))
    }
}

/// `n` unit-normalized Gaussian vectors, identities assigned round-robin.
pub fn gen_embeddings(n: usize, d: usize, n_identities: usize, seed: u64) -> Result<EmbeddingSet> {
    if d == 0 || n_identities == 0 || n < n_identities {
        return Err(Error::validation(format!(
            "invalid sizes n={n} d={d} identities={n_identities}"
        )));
    }
    let mut rng = seed::rng(seed);
    let width = (n - 1).to_string().len();
    let id_width = (n_identities - 1).to_string().len();
    let records = (0..n)
        .map(|i| loop {
            let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            if v.iter().any(|x: &f64| *x != 0.0) {
                break EmbeddingRecord {
                    item_id: format!("img{i:0width$}"),
                    identity: format!("person{:0id_width$}", i % n_identities),
                    vector: v,
                };
            }
        })
        .collect();
    EmbeddingSet::new(records, true)
}

/// Orders the task's candidates by hidden distance plus this worker's noise.
pub fn simulate_worker_ranking(
    task: &RankingTask,
    set: &EmbeddingSet,
    metric: &GroundTruthMetric,
    worker: &WorkerModel,
) -> Result<WorkerRanking> {
    let q = &set.require(&task.query_id)?.vector;
    let (mut rng, normal) = worker.noise(&task.task_id);
    let mut scored = task
        .candidates
        .iter()
        .map(|c| {
            let v = &set.require(c)?.vector;
            let noise = if worker.noise_sigma > 0.0 {
                normal.sample(&mut rng)
            } else {
                0.0
            };
            Ok((metric.distance(q, v) + noise, c.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    Ok(WorkerRanking {
        worker_id: worker.worker_id.clone(),
        task_id: task.task_id.clone(),
        order: scored.into_iter().map(|(_, c)| c).collect(),
    })
}

/// Every worker ranks every task; output ordered by task, then worker.
pub fn simulate_rankings(
    tasks: &[RankingTask],
    set: &EmbeddingSet,
    metric: &GroundTruthMetric,
    workers: &[WorkerModel],
) -> Result<Vec<WorkerRanking>> {
    let mut out = Vec::with_capacity(tasks.len() * workers.len());
    for t in tasks {
        for w in workers {
            out.push(simulate_worker_ranking(t, set, metric, w)?);
        }
    }
    Ok(out)
}

/// Simulated pair-of-pairs votes: each worker picks the pair whose perceived
/// distance (hidden metric, or base distance when `metric` is `None`) plus
/// noise is smaller.
pub fn simulate_pair_votes(
    tasks: &[PairOfPairsTask],
    set: &EmbeddingSet,
    metric: Option<&GroundTruthMetric>,
    workers: &[WorkerModel],
) -> Result<Vec<PairVote>> {
    let dist = |a: &str, b: &str| -> Result<f64> {
        let (x, y) = (&set.require(a)?.vector, &set.require(b)?.vector);
        Ok(match metric {
            Some(m) => m.distance(x, y),
            None => crate::embedding::sq_distance(x, y).sqrt(),
        })
    };
    let mut out = Vec::with_capacity(tasks.len() * workers.len());
    for t in tasks {
        let da = dist(&t.pair_a.0, &t.pair_a.1)?;
        let db = dist(&t.pair_b.0, &t.pair_b.1)?;
        for w in workers {
            let (mut rng, normal) = w.noise(&t.task_id);
            let (na, nb) = if w.noise_sigma > 0.0 {
                (normal.sample(&mut rng), normal.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            out.push(PairVote {
                task_id: t.task_id.clone(),
                worker_id: w.worker_id.clone(),
                choice: if da + na <= db + nb { Choice::A } else { Choice::B },
            });
        }
    }
    Ok(out)
}

//! Turning worker rankings into training signal: lazy-worker filtering,
//! average positions, and confidence-weighted triplets.

use std::collections::{BTreeMap, HashMap};

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::embedding::{sq_distance, EmbeddingSet};
use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::tasks::RankingTask;

pub const DEFAULT_MIN_REARRANGED: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRanking {
    pub worker_id: String,
    pub task_id: String,
    /// Candidate ids, most similar first.
    pub order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedTask {
    pub task_id: String,
    pub query_id: String,
    pub candidates: Vec<String>,
    pub avg_position: BTreeMap<String, f64>,
    pub n_workers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripletKind {
    Hard,
    Easy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub anchor: String,
    pub positive: String,
    pub negative: String,
    pub confidence: f64,
    pub kind: TripletKind,
}

/// Number of slots whose submitted candidate differs from the one presented there.
pub fn rearranged_count(task: &RankingTask, ranking: &WorkerRanking) -> usize {
    task.presented()
        .iter()
        .zip(&ranking.order)
        .filter(|(shown, got)| **shown != got.as_str())
        .count()
}

fn index_tasks(tasks: &[RankingTask]) -> HashMap<&str, &RankingTask> {
    tasks.iter().map(|t| (t.task_id.as_str(), t)).collect()
}

/// Drops every ranking from workers who, on average over their submissions,
/// moved fewer than `min_avg_rearranged` candidates away from their presented slot.
pub fn filter_lazy_workers(
    rankings: &[WorkerRanking],
    tasks: &[RankingTask],
    min_avg_rearranged: f64,
) -> Result<Vec<WorkerRanking>> {
    let by_id = index_tasks(tasks);
    let mut per_worker: HashMap<&str, (usize, usize)> = HashMap::new();
    for r in rankings {
        let task = by_id
            .get(r.task_id.as_str())
            .ok_or_else(|| Error::UnknownTask(r.task_id.clone()))?;
        let e = per_worker.entry(r.worker_id.as_str()).or_default();
        e.0 += rearranged_count(task, r);
        e.1 += 1;
    }
    Ok(rankings
        .iter()
        .filter(|r| {
            let (moved, n) = per_worker[r.worker_id.as_str()];
            moved as f64 / n as f64 >= min_avg_rearranged
        })
        .cloned()
        .collect())
}

fn rankings_for<'a>(
    task: &RankingTask,
    rankings: &'a [WorkerRanking],
) -> Result<Vec<&'a WorkerRanking>> {
    let mine: Vec<_> = rankings.iter().filter(|r| r.task_id == task.task_id).collect();
    if mine.is_empty() {
        return Err(Error::EmptyTask(task.task_id.clone()));
    }
    for r in &mine {
        if !task.is_permutation(&r.order) {
            return Err(Error::validation(format!(
                "ranking by `{}` for `{}` is not a permutation of the candidates",
                r.worker_id, task.task_id
            )));
        }
    }
    Ok(mine)
}

/// Mean 0-based position of each candidate across the task's rankings.
pub fn average_positions(task: &RankingTask, rankings: &[WorkerRanking]) -> Result<AggregatedTask> {
    let mine = rankings_for(task, rankings)?;
    let mut sums: BTreeMap<String, f64> =
        task.candidates.iter().map(|c| (c.clone(), 0.0)).collect();
    for r in &mine {
        for (pos, c) in r.order.iter().enumerate() {
            *sums.get_mut(c).expect("checked permutation") += pos as f64;
        }
    }
    let n = mine.len();
    sums.values_mut().for_each(|s| *s /= n as f64);
    Ok(AggregatedTask {
        task_id: task.task_id.clone(),
        query_id: task.query_id.clone(),
        candidates: task.candidates.clone(),
        avg_position: sums,
        n_workers: n,
    })
}

/// Aggregates every task that has at least one ranking, in task order.
pub fn aggregate_all(tasks: &[RankingTask], rankings: &[WorkerRanking]) -> Vec<AggregatedTask> {
    tasks
        .iter()
        .filter_map(|t| average_positions(t, rankings).ok())
        .collect()
}

/// One triplet per candidate pair, oriented so the majority-preferred candidate is positive.
///
/// Pairs with an exact 50/50 split carry no usable orientation and are skipped.
pub fn extract_hard_triplets(task: &RankingTask, rankings: &[WorkerRanking]) -> Result<Vec<Triplet>> {
    let mine = rankings_for(task, rankings)?;
    let n = mine.len();
    let positions: Vec<HashMap<&str, usize>> = mine
        .iter()
        .map(|r| r.order.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect())
        .collect();
    let c = &task.candidates;
    let mut out = Vec::with_capacity(c.len() * (c.len() - 1) / 2);
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            let i_above = positions
                .iter()
                .filter(|p| p[c[i].as_str()] < p[c[j].as_str()])
                .count();
            if 2 * i_above == n {
                continue;
            }
            let (pos, neg, wins) = if 2 * i_above > n {
                (&c[i], &c[j], i_above)
            } else {
                (&c[j], &c[i], n - i_above)
            };
            out.push(Triplet {
                anchor: task.query_id.clone(),
                positive: pos.clone(),
                negative: neg.clone(),
                confidence: wins as f64 / n as f64,
                kind: TripletKind::Hard,
            });
        }
    }
    Ok(out)
}

/// Hard triplets for every task with surviving rankings, concatenated in task order.
pub fn extract_all_hard_triplets(
    tasks: &[RankingTask],
    rankings: &[WorkerRanking],
) -> Result<Vec<Triplet>> {
    let mut out = Vec::new();
    for t in tasks {
        match extract_hard_triplets(t, rankings) {
            Ok(ts) => out.extend(ts),
            Err(Error::EmptyTask(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Items eligible as easy negatives for `task`: other identities, not among
/// the candidates, and strictly farther than the anchor's (lower) median distance.
pub fn easy_negative_pool(task: &RankingTask, set: &EmbeddingSet) -> Result<Vec<String>> {
    let anchor = set.require(&task.query_id)?;
    let others: Vec<(f64, &str, &str)> = set
        .records()
        .iter()
        .filter(|r| r.item_id != anchor.item_id)
        .map(|r| {
            (
                sq_distance(&anchor.vector, &r.vector),
                r.item_id.as_str(),
                r.identity.as_str(),
            )
        })
        .collect();
    if others.is_empty() {
        return Err(Error::EmptySamplingPool(task.query_id.clone()));
    }
    let mut sorted: Vec<f64> = others.iter().map(|o| o.0).collect();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[(sorted.len() - 1) / 2];
    let pool: Vec<String> = others
        .into_iter()
        .filter(|(d, id, identity)| {
            *d > median && *identity != anchor.identity && !task.candidates.iter().any(|c| c == id)
        })
        .map(|(_, id, _)| id.to_string())
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptySamplingPool(task.query_id.clone()));
    }
    Ok(pool)
}

fn draw_easy(task: &RankingTask, pool: &[String], rng: &mut Rng) -> Triplet {
    Triplet {
        anchor: task.query_id.clone(),
        positive: task.candidates.choose(rng).expect("non-empty task").clone(),
        negative: pool.choose(rng).expect("non-empty pool").clone(),
        confidence: 1.0,
        kind: TripletKind::Easy,
    }
}

/// Positive drawn from the task's candidates, negative from beyond the anchor's median distance.
pub fn sample_easy_triplet(task: &RankingTask, set: &EmbeddingSet, rng: &mut Rng) -> Result<Triplet> {
    if task.candidates.is_empty() {
        return Err(Error::validation(format!("task `{}` has no candidates", task.task_id)));
    }
    let pool = easy_negative_pool(task, set)?;
    Ok(draw_easy(task, &pool, rng))
}

/// Caches easy-negative pools per task so repeated sampling stays cheap.
#[derive(Debug, Clone)]
pub struct EasySampler {
    tasks: Vec<RankingTask>,
    pools: Vec<Vec<String>>,
}

impl EasySampler {
    pub fn new(tasks: &[RankingTask], set: &EmbeddingSet) -> Result<Self> {
        let pools = tasks
            .iter()
            .map(|t| easy_negative_pool(t, set))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            tasks: tasks.to_vec(),
            pools,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Picks a task uniformly, then an easy triplet for it.
    pub fn sample(&self, rng: &mut Rng) -> Triplet {
        let i = rand::Rng::random_range(rng, 0..self.tasks.len());
        draw_easy(&self.tasks[i], &self.pools[i], rng)
    }

    pub fn sample_for(&self, task_index: usize, rng: &mut Rng) -> Triplet {
        draw_easy(&self.tasks[task_index], &self.pools[task_index], rng)
    }
}

//! Ranking tasks: a query plus its nearest cross-identity neighbours, shuffled for display.

use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::seed;

pub const DEFAULT_CANDIDATES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingTask {
    pub task_id: String,
    pub query_id: String,
    /// Candidates ordered by base-embedding distance, nearest first.
    pub candidates: Vec<String>,
    /// Slot `p` on screen shows `candidates[presentation_order[p]]`.
    pub presentation_order: Vec<usize>,
}

impl RankingTask {
    /// Candidate ids in on-screen order.
    pub fn presented(&self) -> Vec<&str> {
        self.presentation_order
            .iter()
            .map(|&i| self.candidates[i].as_str())
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.candidates.len();
        let distinct: HashSet<_> = self.candidates.iter().collect();
        if distinct.len() != n {
            return Err(Error::validation(format!(
                "task `{}` has repeated candidates",
                self.task_id
            )));
        }
        if self.candidates.contains(&self.query_id) {
            return Err(Error::validation(format!(
                "task `{}` lists its query as a candidate",
                self.task_id
            )));
        }
        let mut order = self.presentation_order.clone();
        order.sort_unstable();
        if order != (0..n).collect::<Vec<_>>() {
            return Err(Error::validation(format!(
                "task `{}` presentation_order is not a permutation of 0..{n}",
                self.task_id
            )));
        }
        Ok(())
    }

    /// Checks `order` holds exactly this task's candidates.
    pub fn is_permutation(&self, order: &[String]) -> bool {
        if order.len() != self.candidates.len() {
            return false;
        }
        let want: HashSet<&String> = self.candidates.iter().collect();
        let got: HashSet<&String> = order.iter().collect();
        got.len() == order.len() && got == want
    }
}

pub fn task_id_for(query_id: &str) -> String {
    format!("task-{query_id}")
}

/// Builds one task per query from its `n_candidates` nearest other-identity items.
///
/// Each task's presentation order is drawn from a seed derived from the master
/// seed and the query id, so tasks are independent of query order.
pub fn build_ranking_tasks(
    set: &EmbeddingSet,
    query_ids: &[String],
    n_candidates: usize,
    seed: u64,
) -> Result<Vec<RankingTask>> {
    if n_candidates == 0 {
        return Err(Error::validation("n_candidates must be at least 1"));
    }
    let mut seen = HashSet::new();
    query_ids
        .iter()
        .map(|q| {
            if !seen.insert(q) {
                return Err(Error::validation(format!("query `{q}` listed twice")));
            }
            let hits = set.top_k_similar(q, n_candidates, true)?;
            if hits.len() < n_candidates {
                return Err(Error::InsufficientCandidates {
                    query: q.clone(),
                    needed: n_candidates,
                    available: hits.len(),
                });
            }
            let mut presentation_order: Vec<usize> = (0..n_candidates).collect();
            presentation_order.shuffle(&mut seed::rng(seed::derive(seed, q)));
            Ok(RankingTask {
                task_id: task_id_for(q),
                query_id: q.clone(),
                candidates: hits.into_iter().map(|h| h.item_id).collect(),
                presentation_order,
            })
        })
        .collect()
}

/// Uniformly samples `n` distinct query ids from the set (all of them if `n` exceeds its size).
pub fn sample_queries(set: &EmbeddingSet, n: usize, seed: u64) -> Vec<String> {
    let ids: Vec<&String> = set.records().iter().map(|r| &r.item_id).collect();
    let mut rng = seed::rng(seed);
    let mut picked: Vec<String> = ids
        .choose_multiple(&mut rng, n.min(ids.len()))
        .map(|s| (*s).clone())
        .collect();
    picked.sort();
    picked
}

/// Splits a set into (train, held-out) with no identity in both parts.
///
/// Roughly `holdout_fraction` of the distinct identities (at least one when the
/// fraction is positive) are held out, chosen uniformly under `seed`.
pub fn split_by_identity(
    set: &EmbeddingSet,
    holdout_fraction: f64,
    seed: u64,
) -> Result<(EmbeddingSet, EmbeddingSet)> {
    if !(0.0..1.0).contains(&holdout_fraction) || holdout_fraction == 0.0 {
        return Err(Error::validation("holdout fraction must lie in (0, 1)"));
    }
    let mut identities: Vec<&str> = set.records().iter().map(|r| r.identity.as_str()).collect();
    identities.sort_unstable();
    identities.dedup();
    if identities.len() < 2 {
        return Err(Error::validation("need at least two identities to split"));
    }
    let n_hold = ((identities.len() as f64 * holdout_fraction).round() as usize)
        .clamp(1, identities.len() - 1);
    identities.shuffle(&mut seed::rng(seed));
    let held: HashSet<&str> = identities[..n_hold].iter().copied().collect();
    let train = set.filter(|r| !held.contains(r.identity.as_str()))?;
    let test = set.filter(|r| held.contains(r.identity.as_str()))?;
    Ok((train, test))
}

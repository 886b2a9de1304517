//! Metrics: triplet accuracy (overall, by kind, by confidence), top-1 precision@k,
//! NDCG over the six-candidate ranking, top-pick win rate, ROC-AUC and
//! attribute Hamming distance.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::aggregation::{AggregatedTask, Triplet, TripletKind};
use crate::embedding::{sq_distance, EmbeddingSet};
use crate::error::{Error, Result};
use crate::head::ProjectionHead;

pub const CONFIDENCE_EDGES: [f64; 6] = [0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Head outputs for every item of a base set, looked up by item id.
pub struct Projected<'a> {
    base: &'a EmbeddingSet,
    vectors: Vec<Vec<f64>>,
}

impl<'a> Projected<'a> {
    pub fn new(head: &ProjectionHead, base: &'a EmbeddingSet) -> Result<Self> {
        let vectors = base
            .records()
            .iter()
            .map(|r| head.forward(&r.vector))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { base, vectors })
    }

    pub fn vector(&self, id: &str) -> Result<&[f64]> {
        self.base
            .index_of(id)
            .map(|i| self.vectors[i].as_slice())
            .ok_or_else(|| Error::validation(format!("unknown item `{id}`")))
    }

    pub fn distance(&self, a: &str, b: &str) -> Result<f64> {
        Ok(sq_distance(self.vector(a)?, self.vector(b)?).sqrt())
    }

    /// `candidates` sorted by projected distance to `query`, nearest first, ties by id.
    pub fn rank(&self, query: &str, candidates: &[String]) -> Result<Vec<String>> {
        let mut scored = candidates
            .iter()
            .map(|c| Ok((self.distance(query, c)?, c.clone())))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        Ok(scored.into_iter().map(|(_, c)| c).collect())
    }

    /// A triplet is correct only when the positive is strictly closer than the negative.
    pub fn is_correct(&self, t: &Triplet) -> Result<bool> {
        Ok(self.distance(&t.anchor, &t.positive)? < self.distance(&t.anchor, &t.negative)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub accuracy: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletAccuracy {
    pub accuracy: f64,
    pub count: usize,
    pub hard: Option<Rate>,
    pub easy: Option<Rate>,
}

pub fn triplet_accuracy(
    head: &ProjectionHead,
    base: &EmbeddingSet,
    triplets: &[Triplet],
) -> Result<TripletAccuracy> {
    if triplets.is_empty() {
        return Err(Error::validation("no triplets to evaluate"));
    }
    let proj = Projected::new(head, base)?;
    let mut by_kind: BTreeMap<TripletKind, (usize, usize)> = BTreeMap::new();
    for t in triplets {
        let e = by_kind.entry(t.kind).or_default();
        e.1 += 1;
        if proj.is_correct(t)? {
            e.0 += 1;
        }
    }
    let rate = |k| {
        by_kind.get(&k).map(|&(c, n)| Rate {
            accuracy: c as f64 / n as f64,
            count: n,
        })
    };
    let correct: usize = by_kind.values().map(|v| v.0).sum();
    Ok(TripletAccuracy {
        accuracy: correct as f64 / triplets.len() as f64,
        count: triplets.len(),
        hard: rate(TripletKind::Hard),
        easy: rate(TripletKind::Easy),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceBin {
    pub low: f64,
    pub high: f64,
    /// `None` when the bin is empty.
    pub accuracy: Option<f64>,
    pub count: usize,
}

/// Index of the confidence bin for `c`: half-open bins, the last one closed.
pub fn confidence_bin(edges: &[f64], c: f64) -> Option<usize> {
    let n = edges.len().checked_sub(1)?;
    if c < edges[0] || c > edges[n] {
        return None;
    }
    if c == edges[n] {
        return Some(n - 1);
    }
    Some(edges.partition_point(|&e| e <= c) - 1)
}

pub fn accuracy_by_confidence(
    head: &ProjectionHead,
    base: &EmbeddingSet,
    triplets: &[Triplet],
    edges: &[f64],
) -> Result<Vec<ConfidenceBin>> {
    if edges.len() < 2 || edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("confidence edges must be strictly increasing"));
    }
    let proj = Projected::new(head, base)?;
    let mut tally = vec![(0usize, 0usize); edges.len() - 1];
    for t in triplets {
        if t.confidence <= 0.5 {
            return Err(Error::validation(format!(
                "triplet ({}, {}, {}) has confidence {} <= 0.5",
                t.anchor, t.positive, t.negative, t.confidence
            )));
        }
        let Some(b) = confidence_bin(edges, t.confidence) else {
            continue;
        };
        tally[b].1 += 1;
        if proj.is_correct(t)? {
            tally[b].0 += 1;
        }
    }
    Ok(tally
        .iter()
        .enumerate()
        .map(|(i, &(c, n))| ConfidenceBin {
            low: edges[i],
            high: edges[i + 1],
            accuracy: (n > 0).then(|| c as f64 / n as f64),
            count: n,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecisionAtK {
    pub rates: BTreeMap<usize, f64>,
    pub evaluated: usize,
    /// Tasks skipped because several candidates share the best average position.
    pub skipped: usize,
}

/// The candidate with the strictly lowest average position, if unique.
pub fn ground_truth_top(task: &AggregatedTask) -> Option<&str> {
    let mut best: Option<(&str, f64)> = None;
    let mut tied = false;
    for (c, &p) in &task.avg_position {
        match best {
            None => best = Some((c, p)),
            Some((_, bp)) => match p.total_cmp(&bp) {
                Ordering::Less => {
                    best = Some((c, p));
                    tied = false;
                }
                Ordering::Equal => tied = true,
                Ordering::Greater => {}
            },
        }
    }
    if tied {
        None
    } else {
        best.map(|(c, _)| c)
    }
}

/// Fraction of tasks whose human top pick is among the head's `k` nearest candidates.
pub fn precision_top_k(
    head: &ProjectionHead,
    base: &EmbeddingSet,
    tasks: &[AggregatedTask],
    ks: &[usize],
) -> Result<PrecisionAtK> {
    let proj = Projected::new(head, base)?;
    let mut hits: BTreeMap<usize, usize> = ks.iter().map(|&k| (k, 0)).collect();
    let (mut evaluated, mut skipped) = (0, 0);
    for t in tasks {
        if t.candidates.len() < 2 {
            return Err(Error::validation(format!("task `{}` has < 2 candidates", t.task_id)));
        }
        let Some(top) = ground_truth_top(t) else {
            skipped += 1;
            continue;
        };
        evaluated += 1;
        let order = proj.rank(&t.query_id, &t.candidates)?;
        let at = order.iter().position(|c| c == top).expect("top is a candidate");
        for (&k, h) in hits.iter_mut() {
            if at < k {
                *h += 1;
            }
        }
    }
    if evaluated == 0 {
        return Err(Error::Undefined("every task has a tied top candidate".into()));
    }
    Ok(PrecisionAtK {
        rates: hits
            .into_iter()
            .map(|(k, h)| (k, h as f64 / evaluated as f64))
            .collect(),
        evaluated,
        skipped,
    })
}

/// Graded relevance per candidate: `n_candidates - avg_position`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceProfile {
    pub relevance: HashMap<String, f64>,
}

impl RelevanceProfile {
    pub fn from_aggregated(task: &AggregatedTask) -> Self {
        let n = task.candidates.len() as f64;
        Self {
            relevance: task
                .avg_position
                .iter()
                .map(|(c, p)| (c.clone(), n - p))
                .collect(),
        }
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Self {
        Self {
            relevance: pairs.into_iter().map(|(c, r)| (c.to_string(), r)).collect(),
        }
    }
}

fn dcg(rels: impl Iterator<Item = f64>) -> f64 {
    rels.enumerate()
        .map(|(i, r)| (2f64.powf(r) - 1.0) / ((i + 2) as f64).log2())
        .sum()
}

/// DCG of `model_order` divided by the DCG of the relevance-sorted order.
pub fn ndcg6(model_order: &[String], relevance: &RelevanceProfile) -> Result<f64> {
    if model_order.len() != relevance.relevance.len() {
        return Err(Error::validation("model order must list every candidate once"));
    }
    let rels = model_order
        .iter()
        .map(|c| {
            relevance
                .relevance
                .get(c)
                .copied()
                .ok_or_else(|| Error::validation(format!("`{c}` has no relevance")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut ideal = rels.clone();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let best = dcg(ideal.into_iter());
    if best <= 0.0 {
        return Err(Error::Undefined("all relevances are zero".into()));
    }
    Ok(dcg(rels.into_iter()) / best)
}

pub fn mean_ndcg(head: &ProjectionHead, base: &EmbeddingSet, tasks: &[AggregatedTask]) -> Result<f64> {
    if tasks.is_empty() {
        return Err(Error::validation("no tasks to evaluate"));
    }
    let proj = Projected::new(head, base)?;
    let mut total = 0.0;
    for t in tasks {
        let order = proj.rank(&t.query_id, &t.candidates)?;
        total += ndcg6(&order, &RelevanceProfile::from_aggregated(t))?;
    }
    Ok(total / tasks.len() as f64)
}

/// A task where workers ranked both systems' top picks together.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedTask {
    pub task_id: String,
    pub avg_position: BTreeMap<String, f64>,
    pub pick_a: String,
    pub pick_b: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WinRate {
    pub a: f64,
    pub b: f64,
    pub tie: f64,
}

/// How often system A's top pick sits above (lower average position than) B's.
pub fn top_image_winrate(tasks: &[MergedTask]) -> Result<WinRate> {
    if tasks.is_empty() {
        return Err(Error::validation("no merged tasks"));
    }
    let (mut a, mut b, mut tie) = (0usize, 0usize, 0usize);
    for t in tasks {
        let pos = |id: &str| {
            t.avg_position.get(id).copied().ok_or_else(|| {
                Error::validation(format!("task `{}` has no position for pick `{id}`", t.task_id))
            })
        };
        let (pa, pb) = (pos(&t.pick_a)?, pos(&t.pick_b)?);
        match pa.total_cmp(&pb) {
            Ordering::Less => a += 1,
            Ordering::Greater => b += 1,
            Ordering::Equal => tie += 1,
        }
    }
    let n = tasks.len() as f64;
    Ok(WinRate {
        a: a as f64 / n,
        b: b as f64 / n,
        tie: tie as f64 / n,
    })
}

/// Probability that a same-identity pair is closer than a different-identity
/// pair, ties counted half; computed from mid-ranks in `O(n log n)`.
pub fn roc_auc(scores: &[(f64, bool)]) -> Result<f64> {
    if scores.iter().any(|s| !s.0.is_finite()) {
        return Err(Error::NonFinite("AUC scores"));
    }
    let n_pos = scores.iter().filter(|s| s.1).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Undefined("AUC needs both classes".into()));
    }
    let mut sorted: Vec<&(f64, bool)> = scores.iter().collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum_pos += mid * sorted[i..=j].iter().filter(|s| s.1).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    let u = p * q + p * (p + 1.0) / 2.0 - rank_sum_pos;
    Ok(u / (p * q))
}

/// Mean fraction of differing attribute bits over all (query, retrieved) pairs.
pub fn attribute_hamming_analysis(
    attributes: &HashMap<String, Vec<bool>>,
    retrievals: &[(String, Vec<String>)],
) -> Result<f64> {
    if retrievals.is_empty() {
        return Err(Error::validation("no retrieval lists"));
    }
    let get = |id: &str| {
        attributes
            .get(id)
            .ok_or_else(|| Error::validation(format!("no attributes for `{id}`")))
    };
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (q, list) in retrievals {
        if list.is_empty() {
            return Err(Error::validation(format!("empty retrieval list for `{q}`")));
        }
        let qa = get(q)?;
        for r in list {
            let ra = get(r)?;
            if ra.len() != qa.len() || qa.is_empty() {
                return Err(Error::Dimension {
                    expected: qa.len(),
                    actual: ra.len(),
                });
            }
            let diff = qa.iter().zip(ra).filter(|(a, b)| a != b).count();
            total += diff as f64 / qa.len() as f64;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub hard_accuracy: f64,
    pub easy_accuracy: f64,
    /// Mean of hard and easy accuracy.
    pub total: f64,
    pub hard_count: usize,
    pub easy_count: usize,
    pub per_confidence_bin: Vec<ConfidenceBin>,
    pub precision_at_k: BTreeMap<usize, f64>,
    pub precision_skipped: usize,
    pub mean_ndcg: f64,
}

/// Runs the full held-out evaluation for one head.
pub fn evaluate(
    head: &ProjectionHead,
    base: &EmbeddingSet,
    hard: &[Triplet],
    easy: &[Triplet],
    tasks: &[AggregatedTask],
) -> Result<EvalReport> {
    if hard.is_empty() || easy.is_empty() {
        return Err(Error::validation("evaluation needs both hard and easy triplets"));
    }
    let h = triplet_accuracy(head, base, hard)?;
    let e = triplet_accuracy(head, base, easy)?;
    let k_max = tasks.iter().map(|t| t.candidates.len()).min().unwrap_or(1).max(2) - 1;
    let ks: Vec<usize> = (1..=k_max).collect();
    let prec = precision_top_k(head, base, tasks, &ks)?;
    Ok(EvalReport {
        hard_accuracy: h.accuracy,
        easy_accuracy: e.accuracy,
        total: (h.accuracy + e.accuracy) / 2.0,
        hard_count: h.count,
        easy_count: e.count,
        per_confidence_bin: accuracy_by_confidence(head, base, hard, &CONFIDENCE_EDGES)?,
        precision_at_k: prec.rates,
        precision_skipped: prec.skipped,
        mean_ndcg: mean_ndcg(head, base, tasks)?,
    })
}

impl EvalReport {
    pub fn accuracy_csv(&self) -> String {
        format!(
            "hard,easy,total\n{},{},{}\n",
            self.hard_accuracy, self.easy_accuracy, self.total
        )
    }

    pub fn confidence_csv(&self) -> String {
        let mut s = String::from("low,high,accuracy,count\n");
        for b in &self.per_confidence_bin {
            let acc = b.accuracy.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(s, "{},{},{},{}", b.low, b.high, acc, b.count);
        }
        s
    }

    pub fn precision_csv(&self) -> String {
        let mut s = String::from("k,rate\n");
        for (k, r) in &self.precision_at_k {
            let _ = writeln!(s, "{k},{r}");
        }
        s
    }
}

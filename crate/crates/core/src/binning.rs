//! Distance-bin analysis of a recognition embedding.
//!
//! Cross-identity pairs are grouped into distance bins, pairs from two
//! different bins are shown to workers as a "pair of pairs", and the votes
//! are folded into a bin matrix where `a[i][j]` counts how often the pair
//! from bin `i` was judged more alike than the pair from bin `j`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::embedding::{sq_distance, EmbeddingSet};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceBin {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemPair {
    pub a: String,
    pub b: String,
    pub distance: f64,
}

/// Pairs grouped by bin, along with the edges that produced them.
#[derive(Debug, Clone)]
pub struct BinnedPairs {
    pub edges: Vec<f64>,
    pub bins: BTreeMap<usize, Vec<ItemPair>>,
}

impl BinnedPairs {
    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn bin(&self, i: usize) -> DistanceBin {
        DistanceBin {
            lower: self.edges[i],
            upper: self.edges[i + 1],
        }
    }

    fn pairs(&self, i: usize) -> &[ItemPair] {
        self.bins.get(&i).map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairOfPairsTask {
    pub task_id: String,
    pub pair_a: (String, String),
    pub pair_b: (String, String),
    pub bin_a: usize,
    pub bin_b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairVote {
    pub task_id: String,
    pub worker_id: String,
    pub choice: Choice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMatrix {
    /// `counts[i][j]`: tasks where the bin-`i` pair won over the bin-`j` pair.
    pub counts: Vec<Vec<u64>>,
    pub edges: Vec<f64>,
    pub tasks_per_cell: u64,
}

fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::validation("need at least two bin edges"));
    }
    if edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("bin edges"));
    }
    if edges.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("bin edges must be strictly increasing"));
    }
    Ok(())
}

fn cross_identity_pairs(set: &EmbeddingSet) -> Vec<ItemPair> {
    let recs = set.records();
    let mut out = Vec::with_capacity(recs.len() * recs.len().saturating_sub(1) / 2);
    for (i, x) in recs.iter().enumerate() {
        for y in &recs[i + 1..] {
            if x.identity != y.identity {
                out.push(ItemPair {
                    a: x.item_id.clone(),
                    b: y.item_id.clone(),
                    distance: sq_distance(&x.vector, &y.vector).sqrt(),
                });
            }
        }
    }
    out
}

/// Assigns every cross-identity pair to the half-open bin `[edges[i], edges[i+1])`.
/// Pairs outside `[edges[0], edges[last])` are dropped.
pub fn bin_pairs(set: &EmbeddingSet, edges: &[f64]) -> Result<BinnedPairs> {
    validate_edges(edges)?;
    let mut bins: BTreeMap<usize, Vec<ItemPair>> = BTreeMap::new();
    for pair in cross_identity_pairs(set) {
        if let Some(i) = bin_index(edges, pair.distance) {
            bins.entry(i).or_default().push(pair);
        }
    }
    Ok(BinnedPairs {
        edges: edges.to_vec(),
        bins,
    })
}

pub fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    let last = *edges.last()?;
    if x < edges[0] || x >= last {
        return None;
    }
    // number of edges <= x, minus one
    Some(edges.partition_point(|&e| e <= x) - 1)
}

/// Edges splitting all cross-identity pair distances into `n_bins` equal-count bins.
///
/// The top edge is nudged just above the maximum so the farthest pair is kept.
pub fn quantile_edges(set: &EmbeddingSet, n_bins: usize) -> Result<Vec<f64>> {
    if n_bins == 0 {
        return Err(Error::validation("need at least one bin"));
    }
    let mut d: Vec<f64> = cross_identity_pairs(set).into_iter().map(|p| p.distance).collect();
    if d.len() < n_bins {
        return Err(Error::validation(format!(
            "{} cross-identity pairs cannot fill {n_bins} bins",
            d.len()
        )));
    }
    d.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (0..n_bins).map(|i| d[i * d.len() / n_bins]).collect();
    let max = *d.last().unwrap();
    edges.push(max + max.abs().max(1.0) * 1e-9);
    validate_edges(&edges)
        .map_err(|_| Error::validation("distances too concentrated for distinct quantile edges"))?;
    Ok(edges)
}

/// Samples `per_cell` pair-of-pairs tasks for every unordered bin pair `(i, j)`, `i < j`.
///
/// Within a cell, (pair from bin i, pair from bin j) combinations are drawn
/// uniformly without replacement; which side is shown as `A` is a coin flip.
pub fn build_pair_comparison_tasks(
    binned: &BinnedPairs,
    per_cell: usize,
    seed: u64,
) -> Result<Vec<PairOfPairsTask>> {
    if per_cell == 0 {
        return Err(Error::validation("per_cell must be at least 1"));
    }
    let n = binned.n_bins();
    let mut rng = seed::rng(seed);
    let mut tasks = Vec::with_capacity(per_cell * n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let (pi, pj) = (binned.pairs(i), binned.pairs(j));
            let available = pi.len().saturating_mul(pj.len());
            if available < per_cell {
                return Err(Error::Shortfall {
                    bin_a: i,
                    bin_b: j,
                    needed: per_cell,
                    available,
                });
            }
            for (x, y) in sample_combinations(pi.len(), pj.len(), per_cell, &mut rng) {
                let (lo, hi) = (&pi[x], &pj[y]);
                let id = format!("pp-{i}-{j}-{:04}", tasks.len() % per_cell);
                let swap = rng.random_bool(0.5);
                let (first, second, bin_a, bin_b) = if swap {
                    (hi, lo, j, i)
                } else {
                    (lo, hi, i, j)
                };
                tasks.push(PairOfPairsTask {
                    task_id: id,
                    pair_a: (first.a.clone(), first.b.clone()),
                    pair_b: (second.a.clone(), second.b.clone()),
                    bin_a,
                    bin_b,
                });
            }
        }
    }
    Ok(tasks)
}

fn sample_combinations(
    n_a: usize,
    n_b: usize,
    k: usize,
    rng: &mut seed::Rng,
) -> Vec<(usize, usize)> {
    let total = n_a * n_b;
    if total <= 4 * k {
        let mut all: Vec<usize> = (0..total).collect();
        let (picked, _) = all.partial_shuffle(rng, k);
        return picked.iter().map(|&c| (c / n_b, c % n_b)).collect();
    }
    let mut seen = HashSet::with_capacity(k);
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let c = (rng.random_range(0..n_a), rng.random_range(0..n_b));
        if seen.insert(c) {
            out.push(c);
        }
    }
    out
}

/// Folds votes into a bin matrix. A task counts only when the winning side
/// holds at least `agreement_threshold` of that task's votes.
pub fn aggregate_pair_votes(
    tasks: &[PairOfPairsTask],
    votes: &[PairVote],
    agreement_threshold: f64,
    edges: &[f64],
) -> Result<BinMatrix> {
    if !(agreement_threshold > 0.5 && agreement_threshold <= 1.0) {
        return Err(Error::validation(format!(
            "agreement threshold {agreement_threshold} outside (0.5, 1]"
        )));
    }
    validate_edges(edges)?;
    let n = edges.len() - 1;
    let by_id: HashMap<&str, usize> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.task_id.as_str(), i))
        .collect();
    let mut tally = vec![(0u64, 0u64); tasks.len()];
    let mut voted = HashSet::new();
    for v in votes {
        let &t = by_id
            .get(v.task_id.as_str())
            .ok_or_else(|| Error::UnknownTask(v.task_id.clone()))?;
        if !voted.insert((t, v.worker_id.as_str())) {
            return Err(Error::validation(format!(
                "worker `{}` voted twice on `{}`",
                v.worker_id, v.task_id
            )));
        }
        match v.choice {
            Choice::A => tally[t].0 += 1,
            Choice::B => tally[t].1 += 1,
        }
    }

    let mut counts = vec![vec![0u64; n]; n];
    let mut per_cell: HashMap<(usize, usize), u64> = HashMap::new();
    for (task, &(a, b)) in tasks.iter().zip(&tally) {
        if task.bin_a >= n || task.bin_b >= n || task.bin_a == task.bin_b {
            return Err(Error::validation(format!(
                "task `{}` has invalid bins ({}, {})",
                task.task_id, task.bin_a, task.bin_b
            )));
        }
        let total = a + b;
        if total == 0 {
            return Err(Error::validation(format!("task `{}` has no votes", task.task_id)));
        }
        *per_cell
            .entry((task.bin_a.min(task.bin_b), task.bin_a.max(task.bin_b)))
            .or_default() += 1;
        let need = agreement_threshold * total as f64 - 1e-9;
        if a as f64 >= need {
            counts[task.bin_a][task.bin_b] += 1;
        } else if b as f64 >= need {
            counts[task.bin_b][task.bin_a] += 1;
        }
    }
    Ok(BinMatrix {
        counts,
        edges: edges.to_vec(),
        tasks_per_cell: per_cell.values().copied().max().unwrap_or(0),
    })
}

impl BinMatrix {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn transposed(&self) -> Self {
        let n = self.n_bins();
        let counts = (0..n)
            .map(|i| (0..n).map(|j| self.counts[j][i]).collect())
            .collect();
        Self {
            counts,
            edges: self.edges.clone(),
            tasks_per_cell: self.tasks_per_cell,
        }
    }

    /// Checks `a[i][j] + a[j][i] <= tasks_per_cell` and a zero diagonal.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.n_bins();
        for i in 0..n {
            if self.counts[i][i] != 0 {
                return Err(Error::validation(format!("diagonal cell {i} is non-zero")));
            }
            for j in i + 1..n {
                if self.counts[i][j] + self.counts[j][i] > self.tasks_per_cell {
                    return Err(Error::validation(format!(
                        "cells ({i},{j}) exceed {} tasks",
                        self.tasks_per_cell
                    )));
                }
            }
        }
        Ok(())
    }

    /// CSV with a header row of bin upper bounds; each row is led by its own upper bound.
    pub fn to_csv(&self) -> String {
        let uppers = &self.edges[1..];
        let mut s = String::from("bin");
        for u in uppers {
            let _ = write!(s, ",{u}");
        }
        s.push('\n');
        for (row, u) in self.counts.iter().zip(uppers) {
            let _ = write!(s, "{u}");
            for c in row {
                let _ = write!(s, ",{c}");
            }
            s.push('\n');
        }
        s
    }
}

/// Share of counted comparisons (restricted to `bins`) where the lower-distance
/// pair was judged more similar.
pub fn triangle_accuracy(matrix: &BinMatrix, bins: &[usize]) -> Result<f64> {
    let mut subset: Vec<usize> = bins.to_vec();
    subset.sort_unstable();
    subset.dedup();
    if subset.len() < 2 {
        return Err(Error::validation("triangle accuracy needs at least two bins"));
    }
    if let Some(&bad) = subset.iter().find(|&&b| b >= matrix.n_bins()) {
        return Err(Error::validation(format!("bin {bad} out of range")));
    }
    let (mut upper, mut lower) = (0u64, 0u64);
    for (x, &i) in subset.iter().enumerate() {
        for &j in &subset[x + 1..] {
            upper += matrix.counts[i][j];
            lower += matrix.counts[j][i];
        }
    }
    if upper + lower == 0 {
        return Err(Error::Undefined(
            "no counted comparisons among the selected bins".into(),
        ));
    }
    Ok(upper as f64 / (upper + lower) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::EmbeddingRecord;
    use proptest::prelude::*;
    use rand::RngCore;

    fn line_set(xs: &[f64]) -> EmbeddingSet {
        let recs = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| EmbeddingRecord {
                item_id: format!("i{i:02}"),
                identity: format!("p{i:02}"),
                vector: vec![x],
            })
            .collect();
        EmbeddingSet::new(recs, false).unwrap()
    }

    fn random_set(n: usize, seed: u64) -> EmbeddingSet {
        let mut rng = seed::rng(seed);
        let recs = (0..n)
            .map(|i| EmbeddingRecord {
                item_id: format!("i{i:02}"),
                identity: format!("p{}", i % 15),
                vector: (0..3).map(|_| rng.random_range(-1.0..1.0)).collect(),
            })
            .collect();
        EmbeddingSet::new(recs, false).unwrap()
    }

    #[test]
    fn pair_lands_in_its_bin() {
        let set = line_set(&[0.0, 1.22]);
        let b = bin_pairs(&set, &[1.2, 1.25, 1.3]).unwrap();
        assert_eq!(b.bins[&0].len(), 1);
        assert!(!b.bins.contains_key(&1));
    }

    #[test]
    fn interior_edge_goes_to_upper_bin() {
        let set = line_set(&[0.0, 1.25]);
        let b = bin_pairs(&set, &[1.2, 1.25, 1.3]).unwrap();
        assert_eq!(b.bins[&1].len(), 1);
        assert_eq!(bin_index(&[1.0, 2.0], 2.0), None);
        assert_eq!(bin_index(&[1.0, 2.0], 1.0), Some(0));
    }

    #[test]
    fn non_monotone_edges_rejected() {
        let set = line_set(&[0.0, 1.0]);
        assert!(bin_pairs(&set, &[1.0, 0.5, 2.0]).is_err());
        assert!(bin_pairs(&set, &[1.0]).is_err());
    }

    #[test]
    fn binning_matches_exhaustive_scan() {
        let set = random_set(20, 5);
        let mut rng = seed::rng(6);
        let mut edges: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..3.0)).collect();
        edges.sort_by(f64::total_cmp);
        let binned = bin_pairs(&set, &edges).unwrap();
        let recs = set.records();
        let mut expected: BTreeMap<usize, Vec<(String, String)>> = BTreeMap::new();
        for i in 0..recs.len() {
            for j in i + 1..recs.len() {
                if recs[i].identity == recs[j].identity {
                    continue;
                }
                let d = crate::embedding::euclidean_distance(&recs[i].vector, &recs[j].vector)
                    .unwrap();
                for b in 0..edges.len() - 1 {
                    if d >= edges[b] && d < edges[b + 1] {
                        expected
                            .entry(b)
                            .or_default()
                            .push((recs[i].item_id.clone(), recs[j].item_id.clone()));
                    }
                }
            }
        }
        let got: BTreeMap<usize, Vec<(String, String)>> = binned
            .bins
            .iter()
            .map(|(k, v)| (*k, v.iter().map(|p| (p.a.clone(), p.b.clone())).collect()))
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn task_counts_and_determinism() {
        let set = random_set(60, 1);
        let edges = quantile_edges(&set, 10).unwrap();
        let binned = bin_pairs(&set, &edges).unwrap();
        let tasks = build_pair_comparison_tasks(&binned, 100, 3).unwrap();
        assert_eq!(tasks.len(), 4500);
        assert_eq!(tasks, build_pair_comparison_tasks(&binned, 100, 3).unwrap());
        assert_ne!(tasks, build_pair_comparison_tasks(&binned, 100, 4).unwrap());
        let ids: HashSet<_> = tasks.iter().map(|t| &t.task_id).collect();
        assert_eq!(ids.len(), tasks.len());
        assert!(tasks.iter().all(|t| t.bin_a != t.bin_b));
    }

    #[test]
    fn smallest_instance_and_shortfall() {
        let set = line_set(&[0.0, 1.0, 3.0]);
        let binned = bin_pairs(&set, &[0.0, 1.5, 4.0]).unwrap();
        // bin 0: (0,1)=1.0 ; bin 1: (0,2)=3.0, (1,2)=2.0
        assert_eq!(build_pair_comparison_tasks(&binned, 1, 0).unwrap().len(), 1);
        match build_pair_comparison_tasks(&binned, 3, 0).unwrap_err() {
            Error::Shortfall {
                bin_a, bin_b, available, ..
            } => assert_eq!((bin_a, bin_b, available), (0, 1, 2)),
            e => panic!("{e:?}"),
        }
    }

    fn one_task() -> PairOfPairsTask {
        PairOfPairsTask {
            task_id: "t".into(),
            pair_a: ("a".into(), "b".into()),
            pair_b: ("c".into(), "d".into()),
            bin_a: 0,
            bin_b: 2,
        }
    }

    fn votes(n_a: usize, n_b: usize) -> Vec<PairVote> {
        (0..n_a + n_b)
            .map(|i| PairVote {
                task_id: "t".into(),
                worker_id: format!("w{i}"),
                choice: if i < n_a { Choice::A } else { Choice::B },
            })
            .collect()
    }

    #[test]
    fn eight_of_ten_counts_seven_does_not() {
        let edges = [0.0, 1.0, 2.0, 3.0];
        let m = aggregate_pair_votes(&[one_task()], &votes(8, 2), 0.8, &edges).unwrap();
        assert_eq!(m.counts[0][2], 1);
        let m = aggregate_pair_votes(&[one_task()], &votes(2, 8), 0.8, &edges).unwrap();
        assert_eq!(m.counts[2][0], 1);
        let m = aggregate_pair_votes(&[one_task()], &votes(7, 3), 0.8, &edges).unwrap();
        assert!(m.counts.iter().flatten().all(|&c| c == 0));
        let m = aggregate_pair_votes(&[one_task()], &votes(10, 0), 0.5 + 1e-9, &edges).unwrap();
        assert_eq!(m.counts[0][2], 1);
    }

    #[test]
    fn vote_validation() {
        let edges = [0.0, 1.0, 2.0, 3.0];
        let mut v = votes(1, 0);
        v[0].task_id = "ghost".into();
        assert!(matches!(
            aggregate_pair_votes(&[one_task()], &v, 0.8, &edges),
            Err(Error::UnknownTask(_))
        ));
        let mut v = votes(2, 0);
        v[1].worker_id = v[0].worker_id.clone();
        assert!(aggregate_pair_votes(&[one_task()], &v, 0.8, &edges).is_err());
        assert!(aggregate_pair_votes(&[one_task()], &votes(2, 0), 0.5, &edges).is_err());
    }

    fn matrix(counts: Vec<Vec<u64>>) -> BinMatrix {
        let n = counts.len();
        BinMatrix {
            counts,
            edges: (0..=n).map(|i| i as f64).collect(),
            tasks_per_cell: 10_000,
        }
    }

    #[test]
    fn triangle_examples() {
        let m = matrix(vec![vec![0, 6643], vec![3357, 0]]);
        assert!((triangle_accuracy(&m, &[0, 1]).unwrap() - 0.6643).abs() < 1e-12);
        let m = matrix(vec![vec![0, 5, 3], vec![0, 0, 2], vec![0, 0, 0]]);
        assert_eq!(triangle_accuracy(&m, &[0, 1, 2]).unwrap(), 1.0);
        let zero = matrix(vec![vec![0, 0], vec![0, 0]]);
        assert!(matches!(triangle_accuracy(&zero, &[0, 1]), Err(Error::Undefined(_))));
        assert!(triangle_accuracy(&m, &[1]).is_err());
    }

    #[test]
    fn triangle_matches_double_loop() {
        let mut rng = seed::rng(21);
        let mut counts = vec![vec![0u64; 4]; 4];
        for (i, row) in counts.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                if i != j {
                    *c = rng.next_u64() % 50;
                }
            }
        }
        let m = matrix(counts.clone());
        let subset = [0usize, 2, 3];
        let (mut up, mut lo) = (0u64, 0u64);
        for &i in &subset {
            for &j in &subset {
                if i < j {
                    up += counts[i][j];
                } else if i > j {
                    lo += counts[i][j];
                }
            }
        }
        let want = up as f64 / (up + lo) as f64;
        assert_eq!(triangle_accuracy(&m, &subset).unwrap(), want);
        let both = triangle_accuracy(&m, &[0, 1, 2, 3]).unwrap()
            + triangle_accuracy(&m.transposed(), &[0, 1, 2, 3]).unwrap();
        assert!((both - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let m = BinMatrix {
            counts: vec![vec![0, 7], vec![1, 0]],
            edges: vec![1.0, 1.5, 2.0],
            tasks_per_cell: 10,
        };
        assert_eq!(m.to_csv(), "bin,1.5,2\n1.5,0,7\n2,1,0\n");
    }

    fn fuzz_votes(tasks: &[PairOfPairsTask], seed: u64) -> Vec<PairVote> {
        let mut rng = seed::rng(seed);
        let mut out = Vec::new();
        for t in tasks {
            let n = 1 + rng.random_range(0..10);
            for w in 0..n {
                out.push(PairVote {
                    task_id: t.task_id.clone(),
                    worker_id: format!("w{w}"),
                    choice: if rng.random_bool(0.5) { Choice::A } else { Choice::B },
                });
            }
        }
        out
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn raising_threshold_never_increases_cells(seed in any::<u64>()) {
            let set = random_set(24, seed % 1000);
            let edges = quantile_edges(&set, 4).unwrap();
            let binned = bin_pairs(&set, &edges).unwrap();
            let tasks = build_pair_comparison_tasks(&binned, 5, seed).unwrap();
            let votes = fuzz_votes(&tasks, seed);
            let mut prev: Option<BinMatrix> = None;
            for thr in [0.6, 0.8, 1.0] {
                let m = aggregate_pair_votes(&tasks, &votes, thr, &edges).unwrap();
                m.check_invariants().unwrap();
                prop_assert!(m.tasks_per_cell == 5);
                if let Some(p) = &prev {
                    for (r0, r1) in p.counts.iter().zip(&m.counts) {
                        for (c0, c1) in r0.iter().zip(r1) {
                            prop_assert!(c1 <= c0);
                        }
                    }
                }
                prev = Some(m);
            }
        }
    }
}

//! Base embeddings: loading, validation, distances and exact nearest-neighbour search.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsonl;

const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub item_id: String,
    pub identity: String,
    pub vector: Vec<f64>,
}

/// An immutable, validated collection of base embeddings sharing one dimension.
#[derive(Debug, Clone)]
pub struct EmbeddingSet {
    dim: usize,
    records: Vec<EmbeddingRecord>,
    normalized: bool,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub item_id: String,
    pub distance: f64,
}

impl EmbeddingSet {
    /// Validates records and optionally scales every vector to unit L2 norm.
    ///
    /// The dimension is taken from the first record.
    pub fn new(mut records: Vec<EmbeddingRecord>, normalize: bool) -> Result<Self> {
        let dim = records
            .first()
            .map(|r| r.vector.len())
            .ok_or_else(|| Error::validation("embedding set is empty"))?;
        if dim == 0 {
            return Err(Error::validation("embedding dimension must be positive"));
        }
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter_mut().enumerate() {
            if r.vector.len() != dim {
                return Err(Error::validation(format!(
                    "record `{}` has dimension {}, expected {dim}",
                    r.item_id,
                    r.vector.len()
                )));
            }
            if r.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "record `{}` contains a non-finite value",
                    r.item_id
                )));
            }
            if normalize {
                let n = norm(&r.vector);
                if n == 0.0 {
                    return Err(Error::validation(format!(
                        "record `{}` is a zero vector and cannot be normalized",
                        r.item_id
                    )));
                }
                r.vector.iter_mut().for_each(|v| *v /= n);
            }
            if index.insert(r.item_id.clone(), i).is_some() {
                return Err(Error::validation(format!("duplicate item_id `{}`", r.item_id)));
            }
        }
        let normalized = normalize
            || records
                .iter()
                .all(|r| (norm(&r.vector) - 1.0).abs() <= UNIT_NORM_TOL);
        Ok(Self {
            dim,
            records,
            normalized,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn get(&self, item_id: &str) -> Option<&EmbeddingRecord> {
        self.index.get(item_id).map(|&i| &self.records[i])
    }

    pub fn index_of(&self, item_id: &str) -> Option<usize> {
        self.index.get(item_id).copied()
    }

    pub fn contains(&self, item_id: &str) -> bool {
        self.index.contains_key(item_id)
    }

    pub fn require(&self, item_id: &str) -> Result<&EmbeddingRecord> {
        self.get(item_id)
            .ok_or_else(|| Error::NotFound(item_id.to_string()))
    }

    /// Keeps the records for which `keep` returns true, preserving order.
    pub fn filter(&self, mut keep: impl FnMut(&EmbeddingRecord) -> bool) -> Result<Self> {
        let records: Vec<_> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        Self::new(records, false)
    }

    /// Replaces every vector with `map(vector)`, e.g. to move into a learned space.
    pub fn map_vectors(&self, mut map: impl FnMut(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let records = self
            .records
            .iter()
            .map(|r| {
                Ok(EmbeddingRecord {
                    item_id: r.item_id.clone(),
                    identity: r.identity.clone(),
                    vector: map(&r.vector)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(records, false)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        jsonl::write(path, &self.records)
    }

    /// Exact scan for the `k` items closest to `query_id`, excluding the query.
    ///
    /// Ties are broken by `item_id` so the output is fully determined by the set.
    pub fn top_k_similar(
        &self,
        query_id: &str,
        k: usize,
        exclude_same_identity: bool,
    ) -> Result<Vec<Neighbor>> {
        if k == 0 {
            return Err(Error::validation("k must be at least 1"));
        }
        let query = self.require(query_id)?;
        let mut hits: Vec<Neighbor> = self
            .records
            .iter()
            .filter(|r| r.item_id != query.item_id)
            .filter(|r| !exclude_same_identity || r.identity != query.identity)
            .map(|r| Neighbor {
                item_id: r.item_id.clone(),
                distance: sq_distance(&query.vector, &r.vector).sqrt(),
            })
            .collect();
        hits.sort_by(neighbor_order);
        hits.truncate(k);
        Ok(hits)
    }

    /// Base distance between two stored items.
    pub fn distance(&self, a: &str, b: &str) -> Result<f64> {
        let a = self.require(a)?;
        let b = self.require(b)?;
        Ok(sq_distance(&a.vector, &b.vector).sqrt())
    }
}

pub fn load_embeddings(path: &Path, normalize: bool) -> Result<EmbeddingSet> {
    let records: Vec<EmbeddingRecord> = jsonl::read(path)?;
    // dimension errors are reported with their line so bad files are easy to fix
    if let Some(first) = records.first() {
        let dim = first.vector.len();
        if let Some((i, _)) = records
            .iter()
            .enumerate()
            .find(|(_, r)| r.vector.len() != dim)
        {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!(
                    "vector has length {}, expected {dim}",
                    records[i].vector.len()
                ),
            });
        }
    }
    EmbeddingSet::new(records, normalize)
}

pub fn euclidean_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(sq_distance(a, b).sqrt())
}

/// Squared distance without a length check; callers guarantee equal lengths.
pub(crate) fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn neighbor_order(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.distance
        .total_cmp(&b.distance)
        .then_with(|| a.item_id.cmp(&b.item_id))
}

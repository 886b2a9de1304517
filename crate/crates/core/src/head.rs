//! Trainable affine projection from base-embedding space into similarity space.

use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::seed::Rng;

/// Smoothing added under the square root wherever a norm is differentiated.
pub const NORM_EPS: f64 = 1e-12;

const FORMAT: &str = "lookalike-head";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionHead {
    d_in: usize,
    d_out: usize,
    /// Row-major `d_out x d_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub normalize_output: bool,
}

#[derive(Serialize, Deserialize)]
struct HeadFile {
    format: String,
    version: u32,
    d_in: usize,
    d_out: usize,
    normalize_output: bool,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct Activation {
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
    pub scale: f64,
}

impl ProjectionHead {
    pub fn new(
        d_in: usize,
        d_out: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        normalize_output: bool,
    ) -> Result<Self> {
        if d_in == 0 || d_out == 0 {
            return Err(Error::validation("head dimensions must be positive"));
        }
        if weights.len() != d_in * d_out {
            return Err(Error::Dimension {
                expected: d_in * d_out,
                actual: weights.len(),
            });
        }
        if bias.len() != d_out {
            return Err(Error::Dimension {
                expected: d_out,
                actual: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("head parameters"));
        }
        Ok(Self {
            d_in,
            d_out,
            weights,
            bias,
            normalize_output,
        })
    }

    pub fn identity(d: usize, normalize_output: bool) -> Self {
        let mut weights = vec![0.0; d * d];
        for i in 0..d {
            weights[i * d + i] = 1.0;
        }
        Self {
            d_in: d,
            d_out: d,
            weights,
            bias: vec![0.0; d],
            normalize_output,
        }
    }

    /// Identity (truncated when `d_out < d_in`) plus Gaussian noise of scale `noise`, zero bias.
    pub fn near_identity(
        d_in: usize,
        d_out: usize,
        noise: f64,
        normalize_output: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let normal = Normal::new(0.0, noise).map_err(|e| Error::validation(e.to_string()))?;
        let mut weights: Vec<f64> = (0..d_in * d_out).map(|_| normal.sample(rng)).collect();
        for i in 0..d_in.min(d_out) {
            weights[i * d_in + i] += 1.0;
        }
        Self::new(d_in, d_out, weights, vec![0.0; d_out], normalize_output)
    }

    pub fn d_in(&self) -> usize {
        self.d_in
    }

    pub fn d_out(&self) -> usize {
        self.d_out
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d_in {
            return Err(Error::Dimension {
                expected: self.d_in,
                actual: x.len(),
            });
        }
        Ok(self.activate(x).out)
    }

    pub(crate) fn activate(&self, x: &[f64]) -> Activation {
        let pre: Vec<f64> = self
            .weights
            .chunks_exact(self.d_in)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        if self.normalize_output {
            let scale = (pre.iter().map(|v| v * v).sum::<f64>() + NORM_EPS).sqrt();
            let out = pre.iter().map(|v| v / scale).collect();
            Activation { pre, out, scale }
        } else {
            Activation {
                out: pre.clone(),
                pre,
                scale: 1.0,
            }
        }
    }

    /// Maps every vector of `set` through the head.
    pub fn project(&self, set: &EmbeddingSet) -> Result<EmbeddingSet> {
        set.map_vectors(|v| self.forward(v))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> String {
        let file = HeadFile {
            format: FORMAT.into(),
            version: VERSION,
            d_in: self.d_in,
            d_out: self.d_out,
            normalize_output: self.normalize_output,
            weights: self.weights.clone(),
            bias: self.bias.clone(),
        };
        serde_json::to_string(&file).expect("head serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: HeadFile =
            serde_json::from_str(text).map_err(|e| Error::validation(format!("head file: {e}")))?;
        if f.format != FORMAT || f.version != VERSION {
            return Err(Error::validation(format!(
                "unsupported head file {} v{}",
                f.format, f.version
            )));
        }
        Self::new(f.d_in, f.d_out, f.weights, f.bias, f.normalize_output)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

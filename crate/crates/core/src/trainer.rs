//! Fine-tuning a projection head on hard triplets mixed with sampled easy ones.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::adam::{AdamParams, AdamState};
use crate::aggregation::{EasySampler, Triplet};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::head::ProjectionHead;
use crate::loss::{accumulate, HeadGradient, DEFAULT_MARGIN};
use crate::seed;
use crate::tasks::RankingTask;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Probability that a batch slot holds a sampled easy triplet instead of a hard one.
    pub easy_prob: f64,
    pub epochs: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Output dimension; `None` keeps the input dimension.
    pub d_out: Option<usize>,
    pub normalize_output: bool,
    pub init_noise: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_MARGIN,
            learning_rate: 1e-4,
            batch_size: 32,
            easy_prob: 0.5,
            epochs: 10,
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            d_out: None,
            normalize_output: true,
            init_noise: 1e-3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::validation("alpha must be positive"));
        }
        if !(0.0..=1.0).contains(&self.easy_prob) {
            return Err(Error::validation("easy_prob must lie in [0, 1]"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::validation("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::validation("Adam betas must lie in [0, 1)"));
        }
        if self.d_out == Some(0) {
            return Err(Error::validation("d_out must be positive"));
        }
        Ok(())
    }

    fn adam(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub head: ProjectionHead,
    /// Mean per-triplet loss of each epoch, measured before each batch's update.
    pub loss_curve: Vec<f64>,
}

impl TrainOutcome {
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("epoch,mean_loss\n");
        for (i, l) in self.loss_curve.iter().enumerate() {
            s.push_str(&format!("{},{}\n", i + 1, l));
        }
        s
    }
}

fn resolve(base: &EmbeddingSet, t: &Triplet) -> Result<[usize; 3]> {
    let idx = |id: &str| {
        base.index_of(id)
            .ok_or_else(|| Error::validation(format!("triplet references unknown item `{id}`")))
    };
    Ok([idx(&t.anchor)?, idx(&t.positive)?, idx(&t.negative)?])
}

/// Trains a head from a near-identity start with Adam on the triplet hinge loss.
///
/// Each epoch runs `ceil(hard / batch_size)` batches; every batch slot is an
/// easy triplet with probability `easy_prob`, otherwise a uniformly drawn hard
/// triplet. Single-threaded and bitwise reproducible for a given seed.
pub fn train(
    base: &EmbeddingSet,
    hard: &[Triplet],
    tasks: &[RankingTask],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if hard.is_empty() {
        return Err(Error::validation("training needs at least one hard triplet"));
    }
    let hard_idx = hard
        .iter()
        .map(|t| resolve(base, t))
        .collect::<Result<Vec<_>>>()?;
    let sampler = if config.easy_prob > 0.0 {
        if tasks.is_empty() {
            return Err(Error::validation("easy sampling needs ranking tasks"));
        }
        Some(EasySampler::new(tasks, base)?)
    } else {
        None
    };

    let mut rng = seed::rng(config.seed);
    let d_in = base.dim();
    let mut head = ProjectionHead::near_identity(
        d_in,
        config.d_out.unwrap_or(d_in),
        config.init_noise,
        config.normalize_output,
        &mut rng,
    )?;
    let mut adam = AdamState::new(&head);
    let params = config.adam();
    let recs = base.records();
    let batches = hard.len().div_ceil(config.batch_size);
    let mut curve = Vec::with_capacity(config.epochs);
    let mut grad = HeadGradient::zeros_like(&head);

    for _ in 0..config.epochs {
        let mut epoch_loss = 0.0;
        for _ in 0..batches {
            grad.weights.iter_mut().for_each(|g| *g = 0.0);
            grad.bias.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for _ in 0..config.batch_size {
                let [a, p, n] = match &sampler {
                    Some(s) if rng.random_bool(config.easy_prob) => resolve(base, &s.sample(&mut rng))?,
                    _ => hard_idx[rng.random_range(0..hard_idx.len())],
                };
                batch_loss += accumulate(
                    &head,
                    &recs[a].vector,
                    &recs[p].vector,
                    &recs[n].vector,
                    config.alpha,
                    &mut grad,
                );
            }
            grad.scale(1.0 / config.batch_size as f64);
            adam.step(&mut head, &grad, &params);
            epoch_loss += batch_loss / config.batch_size as f64;
        }
        if head.weights.iter().chain(&head.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("head parameters during training"));
        }
        curve.push(epoch_loss / batches as f64);
    }
    Ok(TrainOutcome {
        head,
        loss_curve: curve,
    })
}

/// The head `train` starts from, without any updates.
pub fn initial_head(d_in: usize, config: &TrainConfig) -> Result<ProjectionHead> {
    let mut rng = seed::rng(config.seed);
    ProjectionHead::near_identity(
        d_in,
        config.d_out.unwrap_or(d_in),
        config.init_noise,
        config.normalize_output,
        &mut rng,
    )
}

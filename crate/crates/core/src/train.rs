//! Adam training of the autoencoder on pristine waveforms.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kae::{loss, KaeGrad, KaeModel, Reduction};
use crate::math::{mix64, powi, sqrt};
use crate::signal::{split_by_repetition, GwSignal};
use crate::{Error, Result};

/// Optimizer and schedule settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Initial step size.
    pub learning_rate: f64,
    /// Minibatch size; the last partial batch of an epoch is kept.
    pub batch_size: usize,
    /// Number of passes over the training set.
    pub epochs: usize,
    /// Decoupled weight decay coefficient.
    pub weight_decay: f64,
    /// Per-epoch learning-rate decay: epoch `e` uses `learning_rate * gamma^e`.
    pub gamma: f64,
    /// Seed for shuffling.
    pub seed: u64,
    /// Fraction of repetitions used for training; the rest is validation.
    pub split_fraction: f64,
    /// Loss reduction over waveform samples.
    pub reduction: Reduction,
    /// First-moment decay.
    pub beta1: f64,
    /// Second-moment decay.
    pub beta2: f64,
    /// Denominator guard.
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            batch_size: 16,
            epochs: 100,
            weight_decay: 1e-6,
            gamma: 0.95,
            seed: 0,
            split_fraction: 0.8,
            reduction: Reduction::Mean,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    /// Range checks.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(Error::Config(format!("split fraction {} outside (0, 1)", self.split_fraction)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} outside (0, 1]", self.gamma)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("weight decay {} must be >= 0", self.weight_decay)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::Config("Adam moments must lie in [0, 1) with eps > 0".into()));
        }
        Ok(())
    }

    /// Learning rate used during `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate * powi(self.gamma, epoch as i32)
    }
}

/// Adam moment accumulators, one pair per parameter block.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    /// First moments.
    pub m: Vec<Vec<f64>>,
    /// Second moments.
    pub v: Vec<Vec<f64>>,
    /// Steps taken so far.
    pub t: u64,
}

impl AdamState {
    /// Zero state shaped like `model`.
    pub fn new(model: &KaeModel) -> Self {
        let mut model = model.clone();
        let sizes: Vec<usize> = model.param_blocks_mut().iter().map(|(_, b)| b.len()).collect();
        Self::with_sizes(&sizes)
    }

    /// Zero state for blocks of the given lengths.
    pub fn with_sizes(sizes: &[usize]) -> Self {
        AdamState {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }
}

/// Per-epoch mean reconstruction losses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    /// Mean training loss of each epoch.
    pub train: Vec<f64>,
    /// Validation loss after each epoch.
    pub val: Vec<f64>,
}

/// One bias-corrected Adam update over named parameter blocks.
///
/// Weight decay is applied first as `p -= lr * wd * p`. Gradients are checked
/// for finiteness before anything is modified.
pub fn adam_update(
    blocks: &mut [(alloc::string::String, &mut [f64])],
    grads: &[&[f64]],
    state: &mut AdamState,
    cfg: &TrainConfig,
    lr: f64,
) -> Result<()> {
    if blocks.len() != grads.len() || blocks.len() != state.m.len() {
        return Err(Error::shape("parameter blocks", blocks.len(), grads.len()));
    }
    for ((name, p), g) in blocks.iter().zip(grads) {
        if p.len() != g.len() {
            return Err(Error::shape("gradient block", p.len(), g.len()));
        }
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::Training(format!("non-finite gradient in {name} at index {i}")));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let bc1 = 1.0 - powi(cfg.beta1, t);
    let bc2 = 1.0 - powi(cfg.beta2, t);
    let decay = lr * cfg.weight_decay;
    for (b, ((_, p), g)) in blocks.iter_mut().zip(grads).enumerate() {
        let m = &mut state.m[b];
        let v = &mut state.v[b];
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            p[i] -= decay * p[i];
            p[i] -= lr * mhat / (sqrt(vhat) + cfg.eps);
        }
    }
    Ok(())
}

/// Adam step on a whole model at the learning rate scheduled for `epoch`.
pub fn adam_step(
    model: &mut KaeModel,
    grads: &KaeGrad,
    state: &mut AdamState,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    let lr = cfg.lr_at(epoch);
    let grads = grads.blocks();
    let mut blocks = model.param_blocks_mut();
    adam_update(&mut blocks, &grads, state, cfg, lr)
}

/// Trains on `baselines`, which must already be normalized to `[0, 1]`.
///
/// See [`train_with`] for the procedure.
pub fn train(model: KaeModel, baselines: &[GwSignal], cfg: &TrainConfig) -> Result<(KaeModel, LossHistory)> {
    train_with(model, baselines, cfg, |_, _, _| {})
}

/// Training with a per-epoch callback `(epoch, train_loss, val_loss)`.
///
/// Baselines are split by repetition (see [`split_by_repetition`]). Each epoch
/// shuffles the training set with a generator seeded once from `cfg.seed`,
/// runs minibatch Adam with batch-averaged gradients, then evaluates the
/// validation set. Summation order is fixed, so results are reproducible.
pub fn train_with<F>(
    mut model: KaeModel,
    baselines: &[GwSignal],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<(KaeModel, LossHistory)>
where
    F: FnMut(usize, f64, f64),
{
    cfg.validate()?;
    if baselines.is_empty() {
        return Err(Error::Data("no baseline signals to train on".into()));
    }
    let m = model.input_width();
    for s in baselines {
        if s.samples.len() != m {
            return Err(Error::Data(format!(
                "signal on path {}-{} rep {} has {} samples, model expects {m}",
                s.path.actuator_id,
                s.path.sensor_id,
                s.repetition,
                s.samples.len()
            )));
        }
        if s.samples.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data(format!(
                "signal on path {}-{} rep {} is not normalized to [0, 1]",
                s.path.actuator_id, s.path.sensor_id, s.repetition
            )));
        }
    }
    let mut history = LossHistory::default();
    if cfg.epochs == 0 {
        return Ok((model, history));
    }
    let (train_set, val_set) = split_by_repetition(baselines, cfg.split_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(cfg.seed ^ 0x5348_5546_464C_4531));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut state = AdamState::new(&model);
    let mut grad = model.zero_grad();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.clear();
            for &i in batch {
                let (l, _) = model.backprop(&train_set[i].samples, cfg.reduction, &mut grad)?;
                if !l.is_finite() {
                    return Err(Error::Training(format!("non-finite loss at epoch {epoch}")));
                }
                epoch_loss += l;
            }
            grad.scale(1.0 / batch.len() as f64);
            adam_step(&mut model, &grad, &mut state, cfg, epoch)?;
        }
        let train_loss = epoch_loss / train_set.len() as f64;
        let val_loss = mean_loss(&model, &val_set, cfg.reduction)?;
        if !val_loss.is_finite() {
            return Err(Error::Training(format!("non-finite validation loss at epoch {epoch}")));
        }
        history.train.push(train_loss);
        history.val.push(val_loss);
        on_epoch(epoch, train_loss, val_loss);
    }
    Ok((model, history))
}

/// Mean reconstruction loss over a set of signals.
pub fn mean_loss(model: &KaeModel, signals: &[GwSignal], reduction: Reduction) -> Result<f64> {
    if signals.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for s in signals {
        total += loss(&s.samples, &model.reconstruct(&s.samples)?, reduction)?;
    }
    Ok(total / signals.len() as f64)
}

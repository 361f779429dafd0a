//! Maximum-likelihood training with minibatch SGD and momentum.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FlowModel, DIM};
use crate::error::{Error, Result};

/// Smallest dataset accepted by [`train`].
pub const MIN_DATASET: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Multiplies the learning rate every `decay_every` epochs.
    pub decay: f64,
    pub decay_every: usize,
    pub momentum: f64,
    pub epochs: usize,
    pub validation_fraction: f64,
    pub n_layers: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            learning_rate: 1e-3,
            decay: 0.5,
            decay_every: 200,
            momentum: 0.9,
            epochs: 600,
            validation_fraction: 0.1,
            n_layers: 4,
            hidden: 16,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if self.batch_size == 0 || self.epochs == 0 || self.n_layers == 0 || self.hidden == 0 || self.decay_every == 0 {
            return bad("batch_size, epochs, n_layers, hidden and decay_every must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 0.5) {
            return bad("validation_fraction must be in (0, 0.5)");
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    /// Mean training NLL over each epoch's minibatches.
    pub train_nll: Vec<f64>,
    /// Validation NLL after each epoch.
    pub val_nll: Vec<f64>,
    /// Validation NLL before the first update.
    pub initial_val_nll: f64,
    pub best_epoch: usize,
    pub best_val_nll: f64,
    pub n_train: usize,
    pub n_val: usize,
}

/// Per-coordinate mean and population standard deviation.
pub fn whitening_stats(data: &[[f64; DIM]]) -> ([f64; DIM], [f64; DIM]) {
    let n = data.len().max(1) as f64;
    let mut mean = [0.0; DIM];
    for t in data {
        for i in 0..DIM {
            mean[i] += t[i] / n;
        }
    }
    let mut std = [0.0; DIM];
    for t in data {
        for i in 0..DIM {
            std[i] += (t[i] - mean[i]).powi(2) / n;
        }
    }
    for s in std.iter_mut() {
        *s = s.sqrt().max(1e-6);
    }
    (mean, std)
}

/// Fits a flow to `dataset` and returns the parameters with the best
/// validation NLL.
pub fn train(dataset: &[[f64; DIM]], cfg: &TrainConfig) -> Result<(FlowModel, TrainReport)> {
    cfg.validate()?;
    if dataset.len() < MIN_DATASET {
        return Err(Error::Config(format!(
            "train: dataset has {} samples, need at least {MIN_DATASET}",
            dataset.len()
        )));
    }
    if let Some(bad) = dataset.iter().find(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(Error::Config(format!("train: non-finite sample {bad:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut data = dataset.to_vec();
    data.shuffle(&mut rng);
    let n_val = ((data.len() as f64 * cfg.validation_fraction).round() as usize).max(1);
    let val = data.split_off(data.len() - n_val);
    let mut train_set = data;
    if cfg.batch_size > train_set.len() {
        return Err(Error::Config(format!(
            "train: batch_size {} exceeds training split of {}",
            cfg.batch_size,
            train_set.len()
        )));
    }

    let (shift, scale) = whitening_stats(&train_set);
    let mut model = FlowModel::new(cfg.n_layers, cfg.hidden, shift, scale, &mut rng);
    let mut params = model.params();
    let mut velocity = vec![0.0; params.len()];

    let initial_val_nll = model.nll(&val);
    let mut best = (0usize, initial_val_nll, params.clone());
    let mut report = TrainReport {
        train_nll: Vec::with_capacity(cfg.epochs),
        val_nll: Vec::with_capacity(cfg.epochs),
        initial_val_nll,
        best_epoch: 0,
        best_val_nll: initial_val_nll,
        n_train: train_set.len(),
        n_val,
    };

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate * cfg.decay.powi((epoch / cfg.decay_every) as i32);
        train_set.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for batch in train_set.chunks(cfg.batch_size) {
            let (loss, grad) = model.nll_and_grad(batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged(format!("non-finite loss at epoch {epoch} (lr {lr})")));
            }
            for ((p, v), g) in params.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
                *v = cfg.momentum * *v - lr * g;
                *p += *v;
            }
            model.set_params(&params);
            epoch_loss += loss;
            batches += 1;
        }
        let v = model.nll(&val);
        if !v.is_finite() {
            return Err(Error::Diverged(format!("non-finite validation NLL at epoch {epoch}")));
        }
        report.train_nll.push(epoch_loss / batches as f64);
        report.val_nll.push(v);
        if v < best.1 {
            best = (epoch + 1, v, params.clone());
        }
    }
    model.set_params(&best.2);
    report.best_epoch = best.0;
    report.best_val_nll = best.1;
    Ok((model, report))
}

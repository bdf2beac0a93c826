//! Mini-batch Adam training with validation-based early stopping.

use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::dataset::GraphSample;
use crate::gat::{GatModel, Mode};
use crate::nn::{adam_step, AdamConfig, AdamState};
use crate::{rng, Error, Result};

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Maximum number of epochs.
    pub epochs: usize,
    /// Epochs without validation improvement before stopping; at least 1.
    pub patience: usize,
    /// Samples per Adam step.
    pub batch_size: usize,
    /// Adam learning rate.
    pub lr: f64,
    /// L2 coefficient on weight matrices.
    pub l2: f64,
    /// Input dropout rate of each attention layer.
    pub dropout_rate: f64,
    /// Fraction of each SNR stratum held out for validation.
    pub val_ratio: f64,
    /// Seed for shuffling and dropout.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            patience: 5,
            batch_size: 32,
            lr: 1e-3,
            l2: 5e-4,
            dropout_rate: 0.5,
            val_ratio: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Checks the documented invariants.
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be at least 1"));
        }
        if self.patience == 0 || self.patience > self.epochs {
            return Err(Error::invalid("patience", "must lie in 1..=epochs"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be at least 1"));
        }
        if !(self.val_ratio > 0.0 && self.val_ratio < 1.0) {
            return Err(Error::invalid("val_ratio", "must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::invalid("dropout_rate", "must lie in [0, 1)"));
        }
        if !(self.lr > 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::invalid("lr/l2", "lr must be positive and l2 non-negative"));
        }
        Ok(())
    }
}

/// Losses recorded at the end of one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// Mean per-sample MSE over the epoch's training batches (dropout active).
    pub train_loss: f64,
    /// Mean per-sample MSE on the validation set (evaluation mode).
    pub val_loss: f64,
}

/// Outcome of [`fit`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    /// One record per completed epoch.
    pub epochs: Vec<EpochRecord>,
    /// Zero-based epoch whose weights were restored.
    pub best_epoch: usize,
    /// True when patience ran out before `epochs`.
    pub stopped_early: bool,
}

impl History {
    /// Best validation loss seen.
    pub fn best_val_loss(&self) -> f64 {
        self.epochs[self.best_epoch].val_loss
    }
}

/// Mean evaluation-mode MSE of `model` over `samples`.
pub fn evaluate_loss(model: &GatModel, samples: &[GraphSample]) -> Result<f64> {
    let mut total = 0.0;
    for s in samples {
        let pred = model.predict(s.graph())?;
        let mse = pred.iter().zip(&s.label).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64;
        total += mse;
    }
    Ok(total / samples.len() as f64)
}

/// Trains `model` in place and restores the weights of the best validation epoch.
pub fn fit(model: &mut GatModel, train: &[GraphSample], val: &[GraphSample], cfg: &TrainConfig) -> Result<History> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::invalid("dataset", "train and validation sets must be non-empty"));
    }
    for s in train.iter().chain(val) {
        if s.label.len() != model.dims.outputs() || s.x.cols() != model.dims.m_p {
            return Err(Error::Length { op: "fit", left: s.label.len(), right: model.dims.outputs() });
        }
    }
    let adam = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let mut states: Vec<AdamState> = model.params().iter().map(|p| AdamState::for_param(p)).collect();
    let mut stream = rng::stream(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History::default();
    let mut best: Option<(f64, GatModel)> = None;
    let mut since_best = 0;
    let mode = Mode::Train { dropout: cfg.dropout_rate };

    model.zero_grad();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut stream);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let s = &train[i];
                batch_loss += model.accumulate(s.graph(), &s.label, mode, scale, &mut stream)?;
            }
            let penalty = model.accumulate_l2(cfg.l2)?;
            if !(batch_loss + penalty).is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: batch_idx, loss: batch_loss + penalty });
            }
            epoch_loss += batch_loss;
            for (p, st) in model.params_mut().into_iter().zip(states.iter_mut()) {
                adam_step(&adam, st, p)?;
            }
        }
        let val_loss = evaluate_loss(model, val)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: usize::MAX, loss: val_loss });
        }
        history.epochs.push(EpochRecord { train_loss: epoch_loss / train.len() as f64, val_loss });
        match &best {
            Some((best_loss, _)) if val_loss >= *best_loss => since_best += 1,
            _ => {
                best = Some((val_loss, model.clone()));
                history.best_epoch = epoch;
                since_best = 0;
            }
        }
        if since_best >= cfg.patience && epoch + 1 < cfg.epochs {
            history.stopped_early = true;
            break;
        }
    }
    if let Some((_, weights)) = best {
        *model = weights;
    }
    Ok(history)
}

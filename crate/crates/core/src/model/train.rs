use serde::{Deserialize, Serialize};

use crate::cells::{Mode, Parameters};
use crate::error::{Error, Result};
use crate::marketdata::SequenceDataset;
use crate::metrics::directional_accuracy;
use crate::numerics::Rng;

use super::{adam_step, clip_global_norm, AdamState, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Global-norm clipping threshold; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub batch_size: usize,
    /// Drives the shuffle schedule and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 20,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_norm: Some(5.0),
            batch_size: 32,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("adam betas must lie in [0, 1)"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::config("adam epsilon must be positive"));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return Err(Error::config("clip_norm must be positive when set"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub dir_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Infer-mode MSE of the untrained model over the training set.
    pub initial_loss: f64,
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.train_loss)
    }
}

/// Infer-mode MSE and predictions over a dataset.
pub fn evaluate(model: &Model, data: &SequenceDataset) -> Result<(f64, Vec<f64>)> {
    if data.is_empty() {
        return Err(Error::data("cannot evaluate on an empty dataset"));
    }
    let preds = data
        .inputs
        .iter()
        .map(|w| model.predict(w))
        .collect::<Result<Vec<_>>>()?;
    let mse = preds
        .iter()
        .zip(&data.targets)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / preds.len() as f64;
    Ok((mse, preds))
}

/// Mini-batch BPTT over full windows with Adam. Each epoch visits the
/// samples in a permutation drawn from `cfg.seed`.
pub fn train(
    model: &mut Model,
    data: &SequenceDataset,
    validation: Option<&SequenceDataset>,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::data("training dataset is empty"));
    }
    let (initial_loss, _) = evaluate(model, data)?;
    let mut rng = Rng::new(cfg.seed);
    let mut grads = model.zeros_like();
    let mut adam = AdamState::new(model.tensors().iter().map(|t| t.len()));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.fill_zero();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &i in batch {
                let trace = model.forward(&data.inputs[i], Mode::Train, &mut rng)?;
                let err = trace.prediction - data.targets[i];
                batch_loss += err * err;
                model.backward(&trace, 2.0 * err * scale, &mut grads)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: batch_idx + 1,
                    completed: epochs,
                });
            }
            loss_sum += batch_loss;
            let mut g = grads.tensors_mut();
            if let Some(max) = cfg.clip_norm {
                clip_global_norm(&mut g, max);
            }
            let g: Vec<&[f64]> = g.into_iter().map(|t| &*t).collect();
            adam_step(&mut model.tensors_mut(), &g, &mut adam, cfg)?;
        }
        let train_loss = loss_sum / data.len() as f64;
        let (val_loss, dir_acc) = match validation {
            Some(v) if !v.is_empty() => {
                let (loss, preds) = evaluate(model, v)?;
                (Some(loss), Some(directional_accuracy(&preds, &v.targets)?))
            }
            _ => (None, None),
        };
        epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            dir_acc,
        });
    }
    Ok(TrainHistory {
        initial_loss,
        epochs,
    })
}

use serde::{Deserialize, Serialize};

use super::rng::Rng;
use super::{epoch_batches, PlateauConfig, StopDecision, TrainControl};
use crate::error::{Error, Result};

/// Hyperparameters of a mini-batch training run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub clip_norm: f64,
    pub plateau: PlateauConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 256,
            max_epochs: 200,
            patience: 25,
            clip_norm: 1.0,
            plateau: PlateauConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config("batch_size, max_epochs and patience must be positive".into()));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("clip_norm must be > 0".into()));
        }
        if !(self.plateau.factor > 0.0 && self.plateau.factor < 1.0) {
            return Err(Error::Config("plateau factor must lie in (0,1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_metric: f64,
    pub lr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub epochs_run: usize,
    /// 0 when the untrained model was never beaten.
    pub best_epoch: usize,
    pub best_val: f64,
    pub history: Vec<EpochLog>,
}

/// Runs the shared epoch loop: shuffled batches, plateau scheduling and
/// early stopping on `validate`, then restores the best model seen.
///
/// `step` trains on one batch of row indices at the given learning rate
/// and returns the batch loss. When `score_initial` is set, the model as
/// passed in is scored first and counts as a candidate best.
pub fn fit<M: Clone>(
    model: &mut M,
    n_train: usize,
    cfg: &FitConfig,
    rng: &mut Rng,
    score_initial: bool,
    mut step: impl FnMut(&mut M, &[usize], f64, &mut Rng) -> Result<f64>,
    mut validate: impl FnMut(&M) -> Result<f64>,
) -> Result<FitReport> {
    cfg.validate()?;
    if n_train < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 training rows, got {n_train}")));
    }
    let mut control = TrainControl::new(cfg.patience, cfg.plateau, cfg.clip_norm);
    let mut lr = cfg.lr;
    let mut best = model.clone();
    let mut report = FitReport {
        epochs_run: 0,
        best_epoch: 0,
        best_val: f64::INFINITY,
        history: Vec::new(),
    };
    if score_initial {
        let v = checked(validate(model)?)?;
        control.early.check(v);
        control.plateau.step(lr, v);
        report.best_val = v;
    }
    for epoch in 1..=cfg.max_epochs {
        let mut total = 0.0;
        let batches = epoch_batches(n_train, cfg.batch_size, rng);
        for batch in &batches {
            total += step(model, batch, lr, rng)? * batch.len() as f64;
        }
        let val = checked(validate(model)?)?;
        report.history.push(EpochLog {
            epoch,
            train_loss: total / n_train as f64,
            val_metric: val,
            lr,
        });
        report.epochs_run = epoch;
        let (next_lr, decision) = control.end_epoch(lr, val);
        lr = next_lr;
        match decision {
            StopDecision::Continue { improved: true } => {
                best = model.clone();
                report.best_epoch = epoch;
                report.best_val = val;
            }
            StopDecision::Continue { improved: false } => {}
            StopDecision::Stop => break,
        }
    }
    *model = best;
    Ok(report)
}

fn checked(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite("validation metric".into()))
    }
}

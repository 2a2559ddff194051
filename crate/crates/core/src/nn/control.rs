//! Gradient clipping and the per-epoch training state machines.

use serde::{Deserialize, Serialize};

use super::ParamTensor;
use crate::error::{Error, Result};

/// Minimum decrease that counts as an improvement.
pub const IMPROVEMENT_TOLERANCE: f64 = 1e-8;

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the factor that was applied (1.0 when nothing changed).
pub fn clip_grad_norm(params: &mut [&mut ParamTensor], max_norm: f64) -> Result<f64> {
    if !(max_norm > 0.0) {
        return Err(Error::Config(format!("clip norm must be > 0, got {max_norm}")));
    }
    let norm = params.iter().map(|p| p.grad.sum_sq()).sum::<f64>().sqrt();
    if !norm.is_finite() {
        return Err(Error::NonFinite("gradient norm".into()));
    }
    if norm <= max_norm {
        return Ok(1.0);
    }
    let factor = max_norm / norm;
    for p in params.iter_mut() {
        p.grad.scale(factor);
    }
    Ok(factor)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        Self {
            factor: 0.5,
            patience: 10,
            min_lr: 1e-7,
        }
    }
}

/// Reduce-on-plateau: after more than `patience` epochs without
/// improvement the learning rate is multiplied by `factor`, floored at
/// `min_lr`, and the counter restarts.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauScheduler {
    pub config: PlateauConfig,
    best: f64,
    bad_epochs: usize,
}

impl PlateauScheduler {
    pub fn new(config: PlateauConfig) -> Self {
        Self {
            config,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn step(&mut self, lr: f64, val_metric: f64) -> f64 {
        if val_metric < self.best - IMPROVEMENT_TOLERANCE {
            self.best = val_metric;
            self.bad_epochs = 0;
            return lr;
        }
        self.bad_epochs += 1;
        if self.bad_epochs > self.config.patience {
            self.bad_epochs = 0;
            return (lr * self.config.factor).max(self.config.min_lr);
        }
        lr
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    /// Keep training; `improved` says whether this epoch is the new best.
    Continue { improved: bool },
    Stop,
}

/// Patience-based early stopping on a validation loss.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub epochs_since_improve: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best: f64::INFINITY,
            epochs_since_improve: 0,
        }
    }

    pub fn check(&mut self, val_metric: f64) -> StopDecision {
        if val_metric < self.best - IMPROVEMENT_TOLERANCE {
            self.best = val_metric;
            self.epochs_since_improve = 0;
            return StopDecision::Continue { improved: true };
        }
        self.epochs_since_improve += 1;
        if self.epochs_since_improve >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue { improved: false }
        }
    }
}

/// The training-control bundle shared by every trainer.
#[derive(Clone, Debug)]
pub struct TrainControl {
    pub early: EarlyStopping,
    pub plateau: PlateauScheduler,
    pub clip_norm: f64,
}

impl TrainControl {
    pub fn new(patience: usize, plateau: PlateauConfig, clip_norm: f64) -> Self {
        Self {
            early: EarlyStopping::new(patience),
            plateau: PlateauScheduler::new(plateau),
            clip_norm,
        }
    }

    /// Updates both state machines; returns the next learning rate and
    /// the stopping decision.
    pub fn end_epoch(&mut self, lr: f64, val_metric: f64) -> (f64, StopDecision) {
        let decision = self.early.check(val_metric);
        let lr = self.plateau.step(lr, val_metric);
        (lr, decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;

    fn grad(values: &[f64]) -> ParamTensor {
        let mut p = ParamTensor::new(Matrix::zeros(1, values.len()));
        p.grad.as_mut_slice().copy_from_slice(values);
        p
    }

    #[test]
    fn clip_examples() {
        let mut small = grad(&[0.3, 0.4]);
        assert_eq!(clip_grad_norm(&mut [&mut small], 1.0).unwrap(), 1.0);
        assert_eq!(small.grad.as_slice(), &[0.3, 0.4]);

        let mut big = grad(&[3.0, 4.0]);
        let f = clip_grad_norm(&mut [&mut big], 1.0).unwrap();
        assert!((f - 0.2).abs() < 1e-15);
        assert!((big.grad.as_slice()[0] - 0.6).abs() < 1e-15);
        assert!((big.grad.as_slice()[1] - 0.8).abs() < 1e-15);

        assert!(clip_grad_norm(&mut [&mut big], 0.0).is_err());
    }

    #[test]
    fn improving_metric_never_reduces_lr() {
        let mut s = PlateauScheduler::new(PlateauConfig { patience: 1, ..Default::default() });
        let mut lr = 1e-3;
        for e in 0..50 {
            lr = s.step(lr, 10.0 - e as f64 * 0.1);
        }
        assert_eq!(lr, 1e-3);
    }

    #[test]
    fn flat_metric_halves_once_per_window() {
        // patience 2: epoch 1 sets the best, epochs 2-4 are bad, the third
        // bad epoch exceeds patience and halves; the next window repeats.
        let mut s = PlateauScheduler::new(PlateauConfig {
            factor: 0.5,
            patience: 2,
            min_lr: 1e-9,
        });
        let trace: Vec<f64> = (0..7)
            .scan(1.0, |lr, _| {
                *lr = s.step(*lr, 1.0);
                Some(*lr)
            })
            .collect();
        assert_eq!(trace, vec![1.0, 1.0, 1.0, 0.5, 0.5, 0.5, 0.25]);
    }

    #[test]
    fn lr_floor() {
        let mut s = PlateauScheduler::new(PlateauConfig {
            factor: 0.1,
            patience: 0,
            min_lr: 1e-4,
        });
        let mut lr = 1e-3;
        for _ in 0..10 {
            lr = s.step(lr, 5.0);
            assert!(lr >= 1e-4);
        }
        assert_eq!(lr, 1e-4);
    }

    #[test]
    fn early_stopping_traces() {
        let mut es = EarlyStopping::new(3);
        for e in 0..100 {
            assert_ne!(es.check(100.0 - e as f64), StopDecision::Stop);
        }

        let mut es = EarlyStopping::new(3);
        let decisions: Vec<_> = (0..4).map(|_| es.check(1.0)).collect();
        assert_eq!(decisions[0], StopDecision::Continue { improved: true });
        assert_eq!(decisions[1], StopDecision::Continue { improved: false });
        assert_eq!(decisions[2], StopDecision::Continue { improved: false });
        assert_eq!(decisions[3], StopDecision::Stop);

        // Improvement on the patience-th epoch resets the counter.
        let mut es = EarlyStopping::new(3);
        es.check(1.0);
        es.check(1.0);
        es.check(1.0);
        assert_eq!(es.check(0.5), StopDecision::Continue { improved: true });
        assert_eq!(es.epochs_since_improve, 0);

        // Changes within tolerance are not improvements.
        let mut es = EarlyStopping::new(2);
        es.check(1.0);
        assert_eq!(es.check(1.0 - 1e-9), StopDecision::Continue { improved: false });
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn clipped_norm_is_bounded(
                values in proptest::collection::vec(-1e3f64..1e3, 1..40),
                max_norm in 1e-3f64..10.0,
            ) {
                let mut p = grad(&values);
                clip_grad_norm(&mut [&mut p], max_norm).unwrap();
                prop_assert!(p.grad.sum_sq().sqrt() <= max_norm + 1e-12);
            }
        }
    }
}

use serde::{Deserialize, Serialize};

use super::ParamTensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam,
    /// Decoupled weight decay applied before the moment update.
    AdamW { weight_decay: f64 },
}

/// Adam / AdamW with bias-corrected moments.
///
/// Moments are allocated on the first step and must keep matching the
/// parameter list passed on later steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Self::with_kind(OptimizerKind::Adam, lr)
    }

    pub fn adamw(lr: f64, weight_decay: f64) -> Self {
        Self::with_kind(OptimizerKind::AdamW { weight_decay }, lr)
    }

    pub fn with_kind(kind: OptimizerKind, lr: f64) -> Self {
        Self {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |b: f64| b > 0.0 && b < 1.0;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.lr)));
        }
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::Config("adam betas must lie in (0,1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("adam eps must be > 0".into()));
        }
        if let OptimizerKind::AdamW { weight_decay } = self.kind {
            if !(weight_decay >= 0.0) {
                return Err(Error::Config("weight decay must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.first_moment
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.second_moment
    }

    /// Applies one update to `params` using their current gradients.
    pub fn step(&mut self, params: &mut [&mut ParamTensor]) -> Result<()> {
        self.validate()?;
        if params.is_empty() || params.iter().all(|p| p.is_empty()) {
            return Err(Error::State("optimizer step with no parameters".into()));
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second_moment = self.first_moment.clone();
        } else if self.first_moment.len() != params.len()
            || self.first_moment.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len())
        {
            return Err(Error::State(
                "optimizer moments do not match the parameter list".into(),
            ));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        let decay = match self.kind {
            OptimizerKind::Adam => 0.0,
            OptimizerKind::AdamW { weight_decay } => self.lr * weight_decay,
        };
        for ((p, m), v) in params
            .iter_mut()
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            let grads = p.grad.as_slice().to_vec();
            let values = p.value.as_mut_slice();
            for i in 0..values.len() {
                let g = grads[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                if decay != 0.0 {
                    values[i] -= decay * values[i];
                }
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                values[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

pub fn zero_grads(params: &mut [&mut ParamTensor]) {
    params.iter_mut().for_each(|p| p.zero_grad());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Matrix;

    fn scalar(v: f64, g: f64) -> ParamTensor {
        let mut p = ParamTensor::new(Matrix::new(1, 1, vec![v]).unwrap());
        p.grad.as_mut_slice()[0] = g;
        p
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = scalar(0.5, 1.0);
        let mut opt = Optimizer::adam(1e-4);
        opt.step(&mut [&mut p]).unwrap();
        let delta = 0.5 - p.value.as_slice()[0];
        assert!((delta - 1e-4 / (1.0 + 1e-8)).abs() < 1e-15, "{delta}");
    }

    #[test]
    fn zero_gradient_leaves_param_unchanged() {
        let mut p = scalar(0.75, 0.0);
        let mut opt = Optimizer::adam(1e-3);
        for _ in 0..5 {
            opt.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.value.as_slice()[0], 0.75);
    }

    #[test]
    fn constant_gradient_is_monotone() {
        // Hand trace: with a constant gradient, m_hat = g and v_hat = g² at
        // every step, so each step subtracts lr·g/(|g|+eps).
        let mut p = scalar(0.0, -2.0);
        let mut opt = Optimizer::adam(0.01);
        let mut prev = 0.0;
        for step in 1..=2 {
            opt.step(&mut [&mut p]).unwrap();
            let now = p.value.as_slice()[0];
            assert!(now > prev);
            let expect = step as f64 * 0.01 * 2.0 / (2.0 + 1e-8);
            assert!((now - expect).abs() < 1e-12);
            prev = now;
        }
    }

    #[test]
    fn adamw_decays_before_update() {
        let mut p = scalar(2.0, 0.0);
        let mut opt = Optimizer::adamw(0.1, 0.5);
        opt.step(&mut [&mut p]).unwrap();
        assert!((p.value.as_slice()[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn empty_or_mismatched_params_error() {
        let mut opt = Optimizer::adam(1e-3);
        assert!(opt.step(&mut []).is_err());
        let mut a = scalar(0.0, 1.0);
        opt.step(&mut [&mut a]).unwrap();
        let mut b = ParamTensor::new(Matrix::zeros(2, 2));
        assert!(opt.step(&mut [&mut b]).is_err());
        assert!(Optimizer::adam(0.0).step(&mut [&mut a]).is_err());
    }
}

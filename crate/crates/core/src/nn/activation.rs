use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Logit magnitude beyond which the sigmoid is held flat, keeping
/// outputs strictly inside (0, 1) in f64.
pub const SIGMOID_LOGIT_LIMIT: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Elu { alpha: f64 },
    LeakyRelu { slope: f64 },
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Activation::Elu { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                Err(Error::Config(format!("ELU alpha must be > 0, got {alpha}")))
            }
            Activation::LeakyRelu { slope } if !(slope > 0.0 && slope < 1.0) => Err(
                Error::Config(format!("LeakyReLU slope must be in (0,1), got {slope}")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        match *self {
            Activation::Elu { alpha } => {
                if v > 0.0 {
                    v
                } else {
                    alpha * v.exp_m1()
                }
            }
            Activation::LeakyRelu { slope } => {
                if v > 0.0 {
                    v
                } else {
                    slope * v
                }
            }
            Activation::Sigmoid => sigmoid(v),
            Activation::Identity => v,
        }
    }

    /// Derivative at pre-activation `pre`, given `post = apply(pre)`.
    #[inline]
    pub fn derivative(&self, pre: f64, post: f64) -> f64 {
        match *self {
            Activation::Elu { alpha } => {
                if pre > 0.0 {
                    1.0
                } else {
                    post + alpha
                }
            }
            Activation::LeakyRelu { slope } => {
                if pre > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => {
                if pre.abs() > SIGMOID_LOGIT_LIMIT {
                    0.0
                } else {
                    post * (1.0 - post)
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[inline]
pub fn sigmoid(v: f64) -> f64 {
    let v = v.clamp(-SIGMOID_LOGIT_LIMIT, SIGMOID_LOGIT_LIMIT);
    1.0 / (1.0 + (-v).exp())
}

/// Elementwise activation with an up-front finiteness check.
pub fn activation_forward(x: &Matrix, activation: Activation) -> Result<Matrix> {
    activation.validate()?;
    x.ensure_finite("activation input")?;
    Ok(x.map(|v| activation.apply(v)))
}

/// Numerically stable softmax of one logit vector.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        out.row_mut(r).copy_from_slice(&softmax(logits.row(r)));
    }
    out
}

/// Back-propagates through a row-wise softmax given its output `probs`.
pub fn softmax_rows_backward(probs: &Matrix, grad_probs: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(probs.rows(), probs.cols());
    for r in 0..probs.rows() {
        let p = probs.row(r);
        let g = grad_probs.row(r);
        let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        for (o, (pi, gi)) in out.row_mut(r).iter_mut().zip(p.iter().zip(g)) {
            *o = pi * (gi - dot);
        }
    }
    out
}

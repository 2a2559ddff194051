use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, Matrix};
use crate::error::{Error, Result};

/// Forward-pass behaviour of batchnorm and dropout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A trainable tensor and its gradient accumulator.
///
/// Only the value is serialized; a freshly loaded tensor has a zero
/// gradient of the same shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Matrix", into = "Matrix")]
pub struct ParamTensor {
    pub value: Matrix,
    pub grad: Matrix,
}

impl ParamTensor {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

impl From<Matrix> for ParamTensor {
    fn from(value: Matrix) -> Self {
        Self::new(value)
    }
}

impl From<ParamTensor> for Matrix {
    fn from(p: ParamTensor) -> Self {
        p.value
    }
}

/// Shape and regularization of one dense layer.
///
/// The forward composition is `dropout(activation(batchnorm(x·W + b)))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
    pub batchnorm: bool,
    pub dropout: f64,
}

impl DenseLayerSpec {
    pub fn linear(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            activation: Activation::Identity,
            batchnorm: false,
            dropout: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config(format!(
                "layer dims must be positive, got {}→{}",
                self.in_dim, self.out_dim
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must be in [0,1), got {}",
                self.dropout
            )));
        }
        self.activation.validate()
    }
}

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: ParamTensor,
    pub beta: ParamTensor,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

#[derive(Clone, Debug)]
struct BnTrace {
    x_hat: Matrix,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: ParamTensor::new(Matrix::filled(1, dim, 1.0)),
            beta: ParamTensor::new(Matrix::zeros(1, dim)),
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    /// Normalizes `x` in place (before the affine step) and returns the
    /// trace needed for backward.
    fn normalize(&mut self, x: &mut Matrix, mode: Mode) -> BnTrace {
        let (n, d) = x.shape();
        let batch_stats = mode == Mode::Train;
        let (mean, inv_std): (Vec<f64>, Vec<f64>) = if batch_stats {
            let mean = x.col_means();
            let mut var = vec![0.0; d];
            for row in x.row_iter() {
                for ((v, m), s) in row.iter().zip(&mean).zip(var.iter_mut()) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|v| *v /= n as f64);
            let unbias = if n > 1 { n as f64 / (n - 1) as f64 } else { 1.0 };
            for j in 0..d {
                self.running_mean[j] =
                    (1.0 - self.momentum) * self.running_mean[j] + self.momentum * mean[j];
                self.running_var[j] =
                    (1.0 - self.momentum) * self.running_var[j] + self.momentum * var[j] * unbias;
            }
            let inv_std = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
            (mean, inv_std)
        } else {
            let inv_std = self
                .running_var
                .iter()
                .map(|v| 1.0 / (v + self.eps).sqrt())
                .collect();
            (self.running_mean.clone(), inv_std)
        };
        self.normalize_with(x, &mean, &inv_std);
        BnTrace {
            x_hat: x.clone(),
            inv_std,
            batch_stats,
        }
    }

    fn normalize_with(&self, x: &mut Matrix, mean: &[f64], inv_std: &[f64]) {
        for r in 0..x.rows() {
            for (j, v) in x.row_mut(r).iter_mut().enumerate() {
                *v = (*v - mean[j]) * inv_std[j];
            }
        }
    }

    fn affine(&self, x_hat: &Matrix) -> Matrix {
        let g = self.gamma.value.as_slice();
        let b = self.beta.value.as_slice();
        let mut y = x_hat.clone();
        for r in 0..y.rows() {
            for (j, v) in y.row_mut(r).iter_mut().enumerate() {
                *v = g[j] * *v + b[j];
            }
        }
        y
    }

    fn infer(&self, x: &Matrix) -> Matrix {
        let inv_std: Vec<f64> = self
            .running_var
            .iter()
            .map(|v| 1.0 / (v + self.eps).sqrt())
            .collect();
        let mut x_hat = x.clone();
        self.normalize_with(&mut x_hat, &self.running_mean, &inv_std);
        self.affine(&x_hat)
    }

    fn backward(&mut self, trace: &BnTrace, grad_out: &Matrix) -> Matrix {
        let (n, d) = grad_out.shape();
        let gamma = self.gamma.value.as_slice().to_vec();
        let mut sum_g = vec![0.0; d];
        let mut sum_gx = vec![0.0; d];
        for r in 0..n {
            let g = grad_out.row(r);
            let xh = trace.x_hat.row(r);
            for j in 0..d {
                sum_g[j] += g[j];
                sum_gx[j] += g[j] * xh[j];
            }
        }
        for j in 0..d {
            self.gamma.grad.as_mut_slice()[j] += sum_gx[j];
            self.beta.grad.as_mut_slice()[j] += sum_g[j];
        }
        let mut dx = Matrix::zeros(n, d);
        let nf = n as f64;
        for r in 0..n {
            let g = grad_out.row(r);
            let xh = trace.x_hat.row(r);
            let out = dx.row_mut(r);
            for j in 0..d {
                out[j] = if trace.batch_stats {
                    // d/dx of (x - mean(x)) / std(x) across the batch.
                    gamma[j] * trace.inv_std[j] / nf
                        * (nf * g[j] - sum_g[j] - xh[j] * sum_gx[j])
                } else {
                    gamma[j] * trace.inv_std[j] * g[j]
                };
            }
        }
        dx
    }
}

/// One fully connected layer with its optional batchnorm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub spec: DenseLayerSpec,
    /// `in_dim × out_dim`.
    pub weight: ParamTensor,
    /// `1 × out_dim`.
    pub bias: ParamTensor,
    pub bn: Option<BatchNorm>,
}

/// Everything backward needs from one forward call.
#[derive(Clone, Debug)]
pub struct DenseTrace {
    input: Matrix,
    bn: Option<BnTrace>,
    pre_act: Matrix,
    post_act: Matrix,
    mask: Option<Vec<f64>>,
}

impl DenseLayer {
    /// Kaiming-uniform weights for rectifier-like activations, Glorot
    /// otherwise; zero bias.
    pub fn new(spec: DenseLayerSpec, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let bound = match spec.activation {
            Activation::Elu { .. } | Activation::LeakyRelu { .. } => {
                (6.0 / spec.in_dim as f64).sqrt()
            }
            _ => (6.0 / (spec.in_dim + spec.out_dim) as f64).sqrt(),
        };
        let data = (0..spec.in_dim * spec.out_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Ok(Self {
            spec,
            weight: ParamTensor::new(Matrix::new(spec.in_dim, spec.out_dim, data)?),
            bias: ParamTensor::new(Matrix::zeros(1, spec.out_dim)),
            bn: spec.batchnorm.then(|| BatchNorm::new(spec.out_dim)),
        })
    }

    pub fn zero_weights(&mut self) {
        self.weight.value.fill(0.0);
        self.bias.value.fill(0.0);
    }

    fn check_input(&self, x: &Matrix, name: &str) -> Result<()> {
        if x.cols() != self.spec.in_dim {
            return Err(Error::dim(
                format!("{name} input"),
                format!("{} columns", self.spec.in_dim),
                format!("{} columns", x.cols()),
            ));
        }
        Ok(())
    }

    pub fn forward(
        &mut self,
        x: &Matrix,
        mode: Mode,
        rng: &mut impl Rng,
        name: &str,
    ) -> Result<(Matrix, DenseTrace)> {
        self.check_input(x, name)?;
        let mut z = x.dot(&self.weight.value);
        z.add_row(self.bias.value.as_slice());
        let (pre_act, bn) = match self.bn.as_mut() {
            Some(bn) => {
                let trace = bn.normalize(&mut z, mode);
                (bn.affine(&trace.x_hat), Some(trace))
            }
            None => (z, None),
        };
        let act = self.spec.activation;
        let post_act = pre_act.map(|v| act.apply(v));
        let p = self.spec.dropout;
        let (out, mask) = if mode == Mode::Train && p > 0.0 {
            let keep = 1.0 / (1.0 - p);
            let mask: Vec<f64> = (0..post_act.len())
                .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
                .collect();
            let mut out = post_act.clone();
            for (v, m) in out.as_mut_slice().iter_mut().zip(&mask) {
                *v *= m;
            }
            (out, Some(mask))
        } else {
            (post_act.clone(), None)
        };
        let trace = DenseTrace {
            input: x.clone(),
            bn,
            pre_act,
            post_act,
            mask,
        };
        Ok((out, trace))
    }

    /// Eval-mode forward that leaves the layer untouched.
    pub fn infer(&self, x: &Matrix, name: &str) -> Result<Matrix> {
        self.check_input(x, name)?;
        let mut z = x.dot(&self.weight.value);
        z.add_row(self.bias.value.as_slice());
        let pre = match &self.bn {
            Some(bn) => bn.infer(&z),
            None => z,
        };
        let act = self.spec.activation;
        Ok(pre.map(|v| act.apply(v)))
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, trace: &DenseTrace, grad_out: &Matrix, name: &str) -> Result<Matrix> {
        if grad_out.shape() != trace.post_act.shape() {
            return Err(Error::dim(
                format!("{name} backward"),
                format!("{:?}", trace.post_act.shape()),
                format!("{:?}", grad_out.shape()),
            ));
        }
        let mut g = grad_out.clone();
        if let Some(mask) = &trace.mask {
            for (v, m) in g.as_mut_slice().iter_mut().zip(mask) {
                *v *= m;
            }
        }
        let act = self.spec.activation;
        for ((v, &pre), &post) in g
            .as_mut_slice()
            .iter_mut()
            .zip(trace.pre_act.as_slice())
            .zip(trace.post_act.as_slice())
        {
            *v *= act.derivative(pre, post);
        }
        if let (Some(bn), Some(bt)) = (self.bn.as_mut(), trace.bn.as_ref()) {
            g = bn.backward(bt, &g);
        }
        self.weight.grad.add_dot_tn(&trace.input, &g);
        for (b, s) in self.bias.grad.as_mut_slice().iter_mut().zip(g.col_sums()) {
            *b += s;
        }
        Ok(g.dot_nt(&self.weight.value))
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut out = vec![&self.weight, &self.bias];
        if let Some(bn) = &self.bn {
            out.push(&bn.gamma);
            out.push(&bn.beta);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = vec![&mut self.weight, &mut self.bias];
        if let Some(bn) = &mut self.bn {
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
        out
    }
}

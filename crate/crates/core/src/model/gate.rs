use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::rng::Rng;
use crate::nn::{softmax_rows, softmax_rows_backward, Activation, DenseLayerSpec, Matrix, Mode, NetTrace, Network, ParamTensor};

pub const GATE_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub hidden: Vec<usize>,
    pub slope: f64,
    pub dropout: f64,
    pub eps: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64],
            slope: 0.01,
            dropout: 0.01,
            eps: GATE_EPS,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!("gate eps must be > 0, got {}", self.eps)));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("gate hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// `(h − μ) / (|σ| + ε)` applied row-wise.
pub fn standardize(h: &Matrix, mu: &[f64], sigma: &[f64], eps: f64) -> Matrix {
    let mut out = h.clone();
    for r in 0..out.rows() {
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            *v = (*v - mu[c]) / (sigma[c].abs() + eps);
        }
    }
    out
}

/// Subgradient of `|s|` with the value 0 at exactly 0.
fn sign(s: f64) -> f64 {
    if s > 0.0 {
        1.0
    } else if s < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Learnable per-modality standardization followed by a small MLP whose
/// three logits are softmaxed into fusion weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub config: GateConfig,
    pub mu: Vec<ParamTensor>,
    pub sigma: Vec<ParamTensor>,
    pub mlp: Network,
}

pub struct GateTrace {
    inputs: Vec<Matrix>,
    mlp: NetTrace,
    alpha: Matrix,
}

impl Gate {
    /// `repr_dims` gives the representation width of each modality in order.
    /// The final layer starts at zero so fresh gates weight experts equally.
    pub fn new(repr_dims: &[usize], config: GateConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let n = repr_dims.len();
        let mut specs = Vec::new();
        let mut prev: usize = repr_dims.iter().sum();
        for &w in &config.hidden {
            specs.push(DenseLayerSpec {
                in_dim: prev,
                out_dim: w,
                activation: Activation::LeakyRelu { slope: config.slope },
                batchnorm: true,
                dropout: config.dropout,
            });
            prev = w;
        }
        specs.push(DenseLayerSpec::linear(prev, n));
        let mut mlp = Network::new("gate", &specs, rng)?;
        if let Some(last) = mlp.layers.last_mut() {
            last.zero_weights();
        }
        Ok(Self {
            mu: repr_dims.iter().map(|&d| ParamTensor::new(Matrix::zeros(1, d))).collect(),
            sigma: repr_dims.iter().map(|&d| ParamTensor::new(Matrix::filled(1, d, 1.0))).collect(),
            config,
            mlp,
        })
    }

    fn standardized(&self, hs: &[&Matrix]) -> Result<Vec<Matrix>> {
        if hs.len() != self.mu.len() {
            return Err(Error::dim("gate inputs", self.mu.len(), hs.len()));
        }
        let rows = hs[0].rows();
        hs.iter()
            .enumerate()
            .map(|(i, h)| {
                if h.cols() != self.mu[i].len() {
                    return Err(Error::dim(format!("gate input {i} width"), self.mu[i].len(), h.cols()));
                }
                if h.rows() != rows {
                    return Err(Error::dim("gate batch size", rows, h.rows()));
                }
                Ok(standardize(h, self.mu[i].value.as_slice(), self.sigma[i].value.as_slice(), self.config.eps))
            })
            .collect()
    }

    pub fn forward(&mut self, hs: &[&Matrix], mode: Mode, rng: &mut Rng) -> Result<(Matrix, GateTrace)> {
        let xs = self.standardized(hs)?;
        let x = Matrix::hcat(&xs.iter().collect::<Vec<_>>())?;
        let (logits, mlp) = self.mlp.forward(&x, mode, rng)?;
        let alpha = softmax_rows(&logits);
        let trace = GateTrace {
            inputs: hs.iter().map(|&h| h.clone()).collect(),
            mlp,
            alpha: alpha.clone(),
        };
        Ok((alpha, trace))
    }

    pub fn infer(&self, hs: &[&Matrix]) -> Result<Matrix> {
        let xs = self.standardized(hs)?;
        let x = Matrix::hcat(&xs.iter().collect::<Vec<_>>())?;
        Ok(softmax_rows(&self.mlp.infer(&x)?))
    }

    /// Accumulates gradients for μ, σ and the MLP and returns the gradient
    /// on each modality representation.
    pub fn backward(&mut self, trace: &GateTrace, grad_alpha: &Matrix) -> Result<Vec<Matrix>> {
        let g_logits = softmax_rows_backward(&trace.alpha, grad_alpha);
        let g_x = self.mlp.backward(&trace.mlp, &g_logits)?;
        let mut out = Vec::with_capacity(trace.inputs.len());
        let mut start = 0;
        for (i, h) in trace.inputs.iter().enumerate() {
            let d = h.cols();
            let g = g_x.col_range(start, start + d)?;
            start += d;
            let eps = self.config.eps;
            let mut g_h = Matrix::zeros(h.rows(), d);
            for c in 0..d {
                let mu = self.mu[i].value.as_slice()[c];
                let s = self.sigma[i].value.as_slice()[c];
                let denom = s.abs() + eps;
                let mut g_mu = 0.0;
                let mut g_sigma = 0.0;
                for r in 0..h.rows() {
                    let gv = g.get(r, c);
                    g_h.set(r, c, gv / denom);
                    g_mu -= gv / denom;
                    g_sigma -= gv * (h.get(r, c) - mu) * sign(s) / (denom * denom);
                }
                self.mu[i].grad.as_mut_slice()[c] += g_mu;
                self.sigma[i].grad.as_mut_slice()[c] += g_sigma;
            }
            out.push(g_h);
        }
        Ok(out)
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p: Vec<&mut ParamTensor> = self.mu.iter_mut().chain(self.sigma.iter_mut()).collect();
        p.extend(self.mlp.params_mut());
        p
    }

    pub fn param_count(&self) -> usize {
        self.mu.iter().chain(&self.sigma).map(ParamTensor::len).sum::<usize>() + self.mlp.param_count()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(ParamTensor::zero_grad);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::rng::seeded;
    use rand::Rng as _;

    fn random(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
        Matrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap()
    }

    #[test]
    fn standardize_examples() {
        let h = Matrix::from_rows(&[[1.0, -3.0]]).unwrap();
        assert_eq!(standardize(&h, &[1.0, -3.0], &[2.0, 2.0], 1e-6).as_slice(), &[0.0, 0.0]);
        assert_eq!(standardize(&h, &[0.0, 0.0], &[0.0, 0.0], 1.0), h);
        let wild = standardize(&h, &[0.0, 0.0], &[0.0, -0.0], 1e-6);
        assert!(wild.is_finite());
    }

    #[test]
    fn fresh_gate_is_uniform() {
        let mut rng = seeded(1);
        let gate = Gate::new(&[4, 3, 5], GateConfig::default(), &mut rng).unwrap();
        let hs = [random(7, 4, &mut rng), random(7, 3, &mut rng), random(7, 5, &mut rng)];
        let alpha = gate.infer(&hs.iter().collect::<Vec<_>>()).unwrap();
        assert!(alpha.as_slice().iter().all(|&a| a == 1.0 / 3.0));
    }

    #[test]
    fn sigma_subgradient_is_zero_at_zero() {
        let mut rng = seeded(2);
        let mut gate = Gate::new(&[2, 2, 2], GateConfig { hidden: vec![3], ..Default::default() }, &mut rng).unwrap();
        gate.sigma[0].value.as_mut_slice()[1] = 0.0;
        for l in &mut gate.mlp.layers {
            for v in l.weight.value.as_mut_slice() {
                *v = rng.random_range(-1.0..1.0);
            }
        }
        let hs = [random(4, 2, &mut rng), random(4, 2, &mut rng), random(4, 2, &mut rng)];
        let refs: Vec<&Matrix> = hs.iter().collect();
        let (alpha, trace) = gate.forward(&refs, Mode::Train, &mut seeded(0)).unwrap();
        gate.backward(&trace, &alpha).unwrap();
        assert_eq!(gate.sigma[0].grad.as_slice()[1], 0.0);
        assert_ne!(gate.sigma[0].grad.as_slice()[0], 0.0);
    }

    #[test]
    fn mismatched_batches_error() {
        let mut rng = seeded(1);
        let gate = Gate::new(&[2, 2, 2], GateConfig::default(), &mut rng).unwrap();
        let a = Matrix::zeros(3, 2);
        let b = Matrix::zeros(4, 2);
        assert!(gate.infer(&[&a, &a, &b]).is_err());
        assert!(gate.infer(&[&a, &a]).is_err());
    }
}

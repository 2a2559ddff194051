use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DenseLayer, DenseLayerSpec, DenseTrace, Matrix, Mode, ParamTensor};
use crate::error::{Error, Result};

/// A stack of dense layers with hand-written backward passes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub name: String,
    pub layers: Vec<DenseLayer>,
}

/// Per-layer traces from one forward pass; consumed by [`Network::backward`].
#[derive(Clone, Debug, Default)]
pub struct NetTrace {
    layers: Vec<DenseTrace>,
}

impl NetTrace {
    /// A trace that records no forward pass.
    pub fn empty() -> Self {
        Self::default()
    }
}

impl Network {
    pub fn new(name: impl Into<String>, specs: &[DenseLayerSpec], rng: &mut impl Rng) -> Result<Self> {
        let name = name.into();
        for pair in specs.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::dim(
                    format!("{name} layer chain"),
                    pair[0].out_dim,
                    pair[1].in_dim,
                ));
            }
        }
        let layers = specs
            .iter()
            .map(|&s| DenseLayer::new(s, rng))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { name, layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.spec.in_dim)
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.spec.out_dim)
    }

    pub fn specs(&self) -> Vec<DenseLayerSpec> {
        self.layers.iter().map(|l| l.spec).collect()
    }

    fn layer_name(&self, i: usize) -> String {
        format!("{}.{i}", self.name)
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode, rng: &mut impl Rng) -> Result<(Matrix, NetTrace)> {
        x.ensure_finite(&format!("{} input", self.name))?;
        let mut traces = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for i in 0..self.layers.len() {
            let name = self.layer_name(i);
            let (y, t) = self.layers[i].forward(&cur, mode, rng, &name)?;
            traces.push(t);
            cur = y;
        }
        cur.ensure_finite(&format!("{} output", self.name))?;
        Ok((cur, NetTrace { layers: traces }))
    }

    /// Eval-mode forward through a shared reference.
    pub fn infer(&self, x: &Matrix) -> Result<Matrix> {
        x.ensure_finite(&format!("{} input", self.name))?;
        let mut cur = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            cur = layer.infer(&cur, &self.layer_name(i))?;
        }
        cur.ensure_finite(&format!("{} output", self.name))?;
        Ok(cur)
    }

    /// Back-propagates `grad_out` through the recorded pass, accumulating
    /// into every parameter gradient, and returns the input gradient.
    pub fn backward(&mut self, trace: &NetTrace, grad_out: &Matrix) -> Result<Matrix> {
        if trace.layers.len() != self.layers.len() {
            return Err(Error::State(format!(
                "{}: backward needs a trace of {} layers, got {} (was forward run?)",
                self.name,
                self.layers.len(),
                trace.layers.len()
            )));
        }
        let mut g = grad_out.clone();
        for i in (0..self.layers.len()).rev() {
            let name = self.layer_name(i);
            g = self.layers[i].backward(&trace.layers[i], &g, &name)?;
        }
        g.ensure_finite(&format!("{} input gradient", self.name))?;
        Ok(g)
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(ParamTensor::zero_grad);
    }
}

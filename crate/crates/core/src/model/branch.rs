use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::rng::Rng;
use crate::nn::{Activation, DenseLayerSpec, Matrix, Mode, NetTrace, Network, ParamTensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Audio,
    Lyrics,
    Social,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Audio, Modality::Lyrics, Modality::Social];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Lyrics => "lyrics",
            Modality::Social => "social",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Width of the representation every branch hands to the gate.
pub const REPR_DIM: usize = 64;

/// Trunk layout of one expert. The last hidden width is the
/// representation dimension seen by the gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub batchnorm: bool,
    pub dropout: Vec<f64>,
    pub weight_decay: f64,
}

impl BranchConfig {
    pub fn default_for(modality: Modality) -> Self {
        let elu = Activation::Elu { alpha: 0.1 };
        match modality {
            Modality::Audio => Self {
                hidden: vec![512, 256, 128, 64],
                activation: elu,
                batchnorm: true,
                dropout: vec![0.3, 0.2, 0.2, 0.1],
                weight_decay: 0.01,
            },
            Modality::Lyrics => Self {
                hidden: vec![1024, 512, 256, 128, 64],
                activation: elu,
                batchnorm: true,
                dropout: vec![0.3, 0.3, 0.2, 0.2, 0.1],
                weight_decay: 0.01,
            },
            Modality::Social => Self {
                hidden: vec![512, 256, 128, 64],
                activation: Activation::LeakyRelu { slope: 0.05 },
                batchnorm: true,
                dropout: vec![0.1, 0.1, 0.05, 0.0],
                weight_decay: 0.0,
            },
        }
    }

    pub fn repr_dim(&self) -> usize {
        self.hidden.last().copied().unwrap_or(0)
    }

    pub fn validate(&self, modality: Modality) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::Config(format!("{modality} branch has no hidden layers")));
        }
        if self.dropout.len() != self.hidden.len() {
            return Err(Error::Config(format!(
                "{modality} branch has {} hidden layers but {} dropout rates",
                self.hidden.len(),
                self.dropout.len()
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!("{modality} weight decay must be >= 0")));
        }
        self.activation.validate()
    }

    fn trunk_specs(&self, input_dim: usize) -> Vec<DenseLayerSpec> {
        let mut prev = input_dim;
        self.hidden
            .iter()
            .zip(&self.dropout)
            .map(|(&out, &dropout)| {
                let spec = DenseLayerSpec {
                    in_dim: prev,
                    out_dim: out,
                    activation: self.activation,
                    batchnorm: self.batchnorm,
                    dropout,
                };
                prev = out;
                spec
            })
            .collect()
    }
}

/// One modality expert: a dense trunk ending in the representation `h`
/// and a sigmoid head producing that modality's own prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpertBranch {
    pub modality: Modality,
    pub config: BranchConfig,
    pub trunk: Network,
    pub head: Network,
    /// Set once phase-1 training has produced this branch.
    pub pretrained: bool,
}

pub struct BranchTrace {
    trunk: NetTrace,
    head: NetTrace,
}

impl ExpertBranch {
    pub fn new(modality: Modality, input_dim: usize, config: BranchConfig, rng: &mut Rng) -> Result<Self> {
        config.validate(modality)?;
        let trunk = Network::new(format!("{modality}.trunk"), &config.trunk_specs(input_dim), rng)?;
        let head_spec = DenseLayerSpec {
            activation: Activation::Sigmoid,
            ..DenseLayerSpec::linear(config.repr_dim(), 1)
        };
        let head = Network::new(format!("{modality}.head"), &[head_spec], rng)?;
        Ok(Self {
            modality,
            config,
            trunk,
            head,
            pretrained: false,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.trunk.in_dim()
    }

    pub fn repr_dim(&self) -> usize {
        self.trunk.out_dim()
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::dim(format!("{} branch input", self.modality), self.input_dim(), x.cols()));
        }
        Ok(())
    }

    /// Returns the representation `h` and the branch prediction column.
    pub fn forward(&mut self, x: &Matrix, mode: Mode, rng: &mut Rng) -> Result<(Matrix, Matrix, BranchTrace)> {
        self.check(x)?;
        let (h, trunk) = self.trunk.forward(x, mode, rng)?;
        let (y, head) = self.head.forward(&h, mode, rng)?;
        Ok((h, y, BranchTrace { trunk, head }))
    }

    pub fn infer(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        self.check(x)?;
        let h = self.trunk.infer(x)?;
        let y = self.head.infer(&h)?;
        Ok((h, y))
    }

    /// Back-propagates a gradient on the prediction plus an optional
    /// extra gradient arriving directly on `h`.
    pub fn backward(&mut self, trace: &BranchTrace, grad_y: &Matrix, grad_h: Option<&Matrix>) -> Result<()> {
        let mut g = self.head.backward(&trace.head, grad_y)?;
        if let Some(extra) = grad_h {
            if extra.shape() != g.shape() {
                return Err(Error::dim(
                    format!("{} representation gradient", self.modality),
                    format!("{:?}", g.shape()),
                    format!("{:?}", extra.shape()),
                ));
            }
            g.add_scaled(extra, 1.0);
        }
        self.trunk.backward(&trace.trunk, &g)?;
        Ok(())
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.trunk.params_mut();
        p.extend(self.head.params_mut());
        p
    }

    pub fn param_count(&self) -> usize {
        self.trunk.param_count() + self.head.param_count()
    }

    pub fn zero_grad(&mut self) {
        self.trunk.zero_grad();
        self.head.zero_grad();
    }
}

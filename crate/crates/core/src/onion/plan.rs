use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayerSpec};

pub const AE_ELU_ALPHA: f64 = 0.1;
pub const AE_DROPOUT: f64 = 0.05;

/// Encoder hidden widths for an input of `d` features.
///
/// Above 4000 inputs the stack is `[d/2, d/3, d/5]`, from 2000 to 4000
/// inclusive `[d/2, d/4]`, below that `[d/2]`; all divisions floor.
pub fn plan_architecture(d: usize) -> Result<Vec<usize>> {
    if d < 2 {
        return Err(Error::Config(format!("autoencoder input dim must be >= 2, got {d}")));
    }
    Ok(if d > 4000 {
        vec![d / 2, d / 3, d / 5]
    } else if d >= 2000 {
        vec![d / 2, d / 4]
    } else {
        vec![d / 2]
    })
}

/// Latent penalty weight; exactly 0.001 at a 128-wide bottleneck.
pub fn lambda_for(d_enc: usize) -> f64 {
    debug_assert!(d_enc >= 1);
    0.001 * 128.0 / d_enc as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeArchitecture {
    pub input_dim: usize,
    pub encoder_hidden: Vec<usize>,
    pub bottleneck: usize,
    pub dropout: f64,
    pub elu_alpha: f64,
}

impl AeArchitecture {
    pub fn plan(input_dim: usize, bottleneck: usize) -> Result<Self> {
        if bottleneck == 0 || bottleneck >= input_dim {
            return Err(Error::Config(format!(
                "bottleneck must satisfy 0 < d_enc < d, got d_enc={bottleneck}, d={input_dim}"
            )));
        }
        Ok(Self {
            input_dim,
            encoder_hidden: plan_architecture(input_dim)?,
            bottleneck,
            dropout: AE_DROPOUT,
            elu_alpha: AE_ELU_ALPHA,
        })
    }

    pub fn decoder_hidden(&self) -> Vec<usize> {
        self.encoder_hidden.iter().rev().copied().collect()
    }

    fn hidden(&self, in_dim: usize, out_dim: usize) -> DenseLayerSpec {
        DenseLayerSpec {
            in_dim,
            out_dim,
            activation: Activation::Elu { alpha: self.elu_alpha },
            batchnorm: true,
            dropout: self.dropout,
        }
    }

    /// input → hidden… → bottleneck (identity, no batchnorm or dropout).
    pub fn encoder_specs(&self) -> Vec<DenseLayerSpec> {
        let mut specs = Vec::new();
        let mut prev = self.input_dim;
        for &h in &self.encoder_hidden {
            specs.push(self.hidden(prev, h));
            prev = h;
        }
        specs.push(DenseLayerSpec::linear(prev, self.bottleneck));
        specs
    }

    /// bottleneck → mirrored hidden… → input (identity output).
    pub fn decoder_specs(&self) -> Vec<DenseLayerSpec> {
        let mut specs = Vec::new();
        let mut prev = self.bottleneck;
        for h in self.decoder_hidden() {
            specs.push(self.hidden(prev, h));
            prev = h;
        }
        specs.push(DenseLayerSpec::linear(prev, self.input_dim));
        specs
    }
}

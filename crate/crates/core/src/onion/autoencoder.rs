use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::{ae_loss, rel_mse, AeLossTerms};
use super::plan::{lambda_for, AeArchitecture};
use super::registry::FeatureGroup;
use crate::error::{Error, Result};
use crate::nn::rng::{derive_seed, seeded, Rng};
use crate::nn::{clip_grad_norm, fit, FitConfig, FitReport, Matrix, Mode, Network, Optimizer};

/// Column divisors below this are treated as zero variance.
pub const DEGENERATE_STD: f64 = 1e-12;

/// Per-column z-scoring fitted on training rows. Zero-variance columns
/// are centred, divided by 1 and flagged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub degenerate: Vec<usize>,
}

impl Standardizer {
    pub fn fit(x: &Matrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::InvalidInput("cannot standardize an empty matrix".into()));
        }
        let mean = x.col_means();
        let n = x.rows() as f64;
        let mut scale = vec![0.0; x.cols()];
        for row in x.row_iter() {
            for (c, v) in row.iter().enumerate() {
                scale[c] += (v - mean[c]).powi(2);
            }
        }
        let mut degenerate = Vec::new();
        for (c, s) in scale.iter_mut().enumerate() {
            *s = (*s / n).sqrt();
            if *s < DEGENERATE_STD {
                *s = 1.0;
                degenerate.push(c);
            }
        }
        Ok(Self { mean, scale, degenerate })
    }

    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(Error::dim("standardizer input", self.mean.len(), x.cols()));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.scale[c];
            }
        }
        Ok(out)
    }
}

/// Autoencoder settings shared by every group.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeTrainConfig {
    pub fit: FitConfig,
    pub val_fraction: f64,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            val_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupAutoencoder {
    pub group: FeatureGroup,
    pub arch: AeArchitecture,
    pub standardizer: Standardizer,
    pub encoder: Network,
    pub decoder: Network,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub name: String,
    pub val_rel_mse: f64,
    pub degenerate_columns: Vec<usize>,
    pub fit: FitReport,
}

impl GroupAutoencoder {
    pub fn new(group: FeatureGroup, standardizer: Standardizer, rng: &mut Rng) -> Result<Self> {
        let arch = AeArchitecture::plan(group.input_dim(), group.d_enc)?;
        if standardizer.mean.len() != group.input_dim() {
            return Err(Error::dim(format!("group {} standardizer", group.name), group.input_dim(), standardizer.mean.len()));
        }
        let encoder = Network::new(format!("{}.encoder", group.name), &arch.encoder_specs(), rng)?;
        let decoder = Network::new(format!("{}.decoder", group.name), &arch.decoder_specs(), rng)?;
        Ok(Self { group, arch, standardizer, encoder, decoder })
    }

    pub fn lambda(&self) -> f64 {
        lambda_for(self.group.d_enc)
    }

    /// Forward and backward on standardized rows; gradients accumulate.
    pub fn train_batch(&mut self, x: &Matrix, rng: &mut Rng) -> Result<AeLossTerms> {
        let (z, enc_trace) = self.encoder.forward(x, Mode::Train, rng)?;
        let (x_hat, dec_trace) = self.decoder.forward(&z, Mode::Train, rng)?;
        let (terms, grads) = ae_loss(x, &x_hat, &z, self.lambda())?;
        let mut g_z = self.decoder.backward(&dec_trace, &grads.x_hat)?;
        g_z.add_scaled(&grads.z, 1.0);
        self.encoder.backward(&enc_trace, &g_z)?;
        Ok(terms)
    }

    /// Eval-mode loss on standardized rows.
    pub fn eval_loss(&self, x: &Matrix) -> Result<(AeLossTerms, Matrix)> {
        let z = self.encoder.infer(x)?;
        let x_hat = self.decoder.infer(&z)?;
        let (terms, _) = ae_loss(x, &x_hat, &z, self.lambda())?;
        Ok((terms, x_hat))
    }

    pub fn encode_standardized(&self, x: &Matrix) -> Result<Matrix> {
        self.encoder.infer(x)
    }

    /// Standardizes raw group columns and returns bottleneck codes.
    pub fn encode(&self, raw: &Matrix) -> Result<Matrix> {
        self.encoder.infer(&self.standardizer.transform(raw)?)
    }

    /// Round trip of raw group columns, in standardized units.
    pub fn reconstruct_standardized(&self, raw: &Matrix) -> Result<(Matrix, Matrix)> {
        let x = self.standardizer.transform(raw)?;
        let x_hat = self.decoder.infer(&self.encoder.infer(&x)?)?;
        Ok((x, x_hat))
    }

    pub fn params_mut(&mut self) -> Vec<&mut crate::nn::ParamTensor> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }
}

/// Splits `n` rows into shuffled (train, validation) index lists.
pub fn holdout_split(n: usize, val_fraction: f64, rng: &mut Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..1.0).contains(&val_fraction) || val_fraction == 0.0 {
        return Err(Error::Config(format!("validation fraction must be in (0,1), got {val_fraction}")));
    }
    let n_val = ((n as f64 * val_fraction).round() as usize).max(2);
    if n < n_val + 2 {
        return Err(Error::InvalidInput(format!("{n} rows are too few for a validation split")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let val = order.split_off(n - n_val);
    Ok((order, val))
}

/// Trains one group on its raw columns (`raw.cols() == group width`).
///
/// Standardization is fitted on the training part of the holdout split;
/// the returned model holds the weights of the best validation epoch,
/// and the report carries that model's validation RelMSE in
/// standardized units.
pub fn train_group_autoencoder(
    group: &FeatureGroup,
    raw: &Matrix,
    cfg: &AeTrainConfig,
    seed: u64,
) -> Result<(GroupAutoencoder, GroupReport)> {
    if raw.cols() != group.input_dim() {
        return Err(Error::dim(format!("group {} data", group.name), group.input_dim(), raw.cols()));
    }
    let mut rng = seeded(derive_seed(seed, &format!("ae/{}", group.name)));
    let (train_idx, val_idx) = holdout_split(raw.rows(), cfg.val_fraction, &mut rng)?;
    let train_raw = raw.select_rows(&train_idx);
    let standardizer = Standardizer::fit(&train_raw)?;
    let train = standardizer.transform(&train_raw)?;
    let val = standardizer.transform(&raw.select_rows(&val_idx))?;

    let mut model = GroupAutoencoder::new(group.clone(), standardizer, &mut rng)?;
    let mut opt = Optimizer::adam(cfg.fit.lr);
    let clip = cfg.fit.clip_norm;
    let report = fit(
        &mut model,
        train.rows(),
        &cfg.fit,
        &mut rng,
        false,
        |m, batch, lr, rng| {
            let xb = train.select_rows(batch);
            m.encoder.zero_grad();
            m.decoder.zero_grad();
            let terms = m.train_batch(&xb, rng)?;
            let mut params = m.params_mut();
            clip_grad_norm(&mut params, clip)?;
            opt.lr = lr;
            opt.step(&mut params)?;
            Ok(terms.total)
        },
        |m| Ok(m.eval_loss(&val)?.0.total),
    )?;
    let (_, val_hat) = model.eval_loss(&val)?;
    let val_rel_mse = rel_mse(&val, &val_hat)?;
    let degenerate_columns = model.standardizer.degenerate.clone();
    Ok((
        model,
        GroupReport {
            name: group.name.clone(),
            val_rel_mse,
            degenerate_columns,
            fit: report,
        },
    ))
}

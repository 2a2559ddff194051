use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AeLossTerms {
    pub recon: f64,
    pub latent_penalty: f64,
    pub lambda: f64,
    pub total: f64,
}

/// Gradients of [`AeLossTerms::total`] with respect to `x̂` and `z`.
#[derive(Clone, Debug)]
pub struct AeLossGrads {
    pub x_hat: Matrix,
    pub z: Matrix,
}

/// Reconstruction MSE over all elements plus `lambda` times the batch
/// mean of the squared row norms of `z`.
pub fn ae_loss(x: &Matrix, x_hat: &Matrix, z: &Matrix, lambda: f64) -> Result<(AeLossTerms, AeLossGrads)> {
    if x.shape() != x_hat.shape() {
        return Err(Error::dim("reconstruction", format!("{:?}", x.shape()), format!("{:?}", x_hat.shape())));
    }
    if z.rows() != x.rows() {
        return Err(Error::dim("bottleneck batch", x.rows(), z.rows()));
    }
    if x.is_empty() {
        return Err(Error::InvalidInput("empty autoencoder batch".into()));
    }
    let diff = x_hat.sub(x);
    let n = x.len() as f64;
    let recon = diff.sum_sq() / n;
    let batch = z.rows() as f64;
    let latent_penalty = lambda * z.sum_sq() / batch;

    let mut g_xhat = diff;
    g_xhat.scale(2.0 / n);
    let mut g_z = z.clone();
    g_z.scale(2.0 * lambda / batch);
    Ok((
        AeLossTerms {
            recon,
            latent_penalty,
            lambda,
            total: recon + latent_penalty,
        },
        AeLossGrads { x_hat: g_xhat, z: g_z },
    ))
}

/// Σ(x − x̂)² / Σ(x − x̄)², with x̄ the per-column mean of `x`.
pub fn rel_mse(x: &Matrix, x_hat: &Matrix) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::dim("rel_mse", format!("{:?}", x.shape()), format!("{:?}", x_hat.shape())));
    }
    let means = x.col_means();
    let mut sst = 0.0;
    for row in x.row_iter() {
        sst += row.iter().zip(&means).map(|(v, m)| (v - m).powi(2)).sum::<f64>();
    }
    if !(sst > 0.0) {
        return Err(Error::InvalidInput("rel_mse undefined for zero-variance data".into()));
    }
    Ok(x_hat.sub(x).sum_sq() / sst)
}

//! Compress two raw audio groups, one low-rank and one pure noise, and
//! compare reconstruction error.

use gamenet::nn::rng::seeded;
use gamenet::nn::{FitConfig, Matrix};
use gamenet::onion::{train_ensemble, AeTrainConfig, Registry};
use rand_distr::{Distribution, StandardNormal};

fn main() -> gamenet::Result<()> {
    let n = 2000;
    let mut rng = seeded(3);
    let mut gauss = |r: usize, c: usize| Matrix::new(r, c, (0..r * c).map(|_| StandardNormal.sample(&mut rng)).collect());
    let mut structured = gauss(n, 3)?.dot(&gauss(3, 32)?);
    structured.add_scaled(&gauss(n, 32)?, 0.1);
    let noise = gauss(n, 16)?;
    let raw = Matrix::hcat(&[&structured, &noise])?;

    let registry = Registry::contiguous(&[("structured", 32, 3), ("noise", 16, 3)])?;
    let cfg = AeTrainConfig {
        fit: FitConfig { lr: 1e-3, max_epochs: 150, ..FitConfig::default() },
        ..AeTrainConfig::default()
    };
    let (ensemble, reports) = train_ensemble(&registry, &raw, &cfg, 46)?;
    for r in &reports {
        println!("{:<10} val RelMSE {:.3} after {} epochs", r.name, r.val_rel_mse, r.fit.epochs_run);
    }
    let codes = ensemble.compress(&raw)?;
    println!("{} raw columns -> {} codes: {:?}", raw.cols(), codes.cols(), ensemble.output_names());
    Ok(())
}

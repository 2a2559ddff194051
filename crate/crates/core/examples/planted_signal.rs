//! Train the expert ensemble on synthetic data where only the social
//! modality carries signal, then look at how the gate splits its weight.

use gamenet::data::{Scaler, ScalerKind, SynthSpec};
use gamenet::model::{phase1_train_all, phase2_train, validation_split, GameNet, GameNetConfig, MultiModalSet, Phase2Config};
use gamenet::nn::rng::seeded;
use gamenet::nn::FitConfig;

fn main() -> gamenet::Result<()> {
    let data = SynthSpec { n: 2000, coefs: [0.0, 0.0, 1.0], ..SynthSpec::default() }.generate()?;
    let mut xs = data.features.clone();
    for x in xs.iter_mut() {
        let mut s = Scaler::new(ScalerKind::ZScore);
        s.fit(x)?;
        *x = s.transform(x)?;
    }
    let set = MultiModalSet::new(xs, data.target().into_vec())?;
    let (t, v) = validation_split(&set.y, 0.2, 1)?;
    let (train, val) = (set.select(&t), set.select(&v));

    let mut model = GameNet::new(train.xs.each_ref().map(|x| x.cols()), &GameNetConfig::default(), &mut seeded(46))?;
    let phase1 = FitConfig { max_epochs: 60, ..FitConfig::default() };
    for r in phase1_train_all(&mut model, &train, &val, &phase1, 46)? {
        println!("{:<7} val R2 {:>6.3}", r.modality.to_string(), r.val_r2.unwrap_or(f64::NAN));
    }
    let cfg = Phase2Config {
        fit: FitConfig { lr: 1e-3, max_epochs: 30, ..FitConfig::default() },
        ..Phase2Config::default()
    };
    let report = phase2_train(&mut model, &train, &val, &cfg, 46)?;
    println!(
        "ensemble val MSE {:.5} (uniform weights {:.5}), mean gate weights audio/lyrics/social {:.3?}",
        report.val_mse, report.initial_val_mse, report.mean_alpha
    );
    Ok(())
}

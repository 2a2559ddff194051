use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::branch::{ExpertBranch, Modality};
use super::gamenet::{total_loss, GameNet, LossWeights, MultiModalSet};
use crate::data::{stratified_split, SplitLabel};
use crate::error::{Error, Result};
use crate::nn::rng::{derive_seed, seeded};
use crate::nn::{clip_grad_norm, fit, mse, FitConfig, FitReport, Matrix, Mode, Optimizer, ParamTensor};

/// Holds out `fraction` of rows for early stopping, stratified on five
/// quantile bins of the target.
pub fn validation_split(y: &[f64], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let s = stratified_split(y, 5, fraction, seed)?;
    Ok((s.indices(SplitLabel::Train), s.indices(SplitLabel::Test)))
}

fn check_unit_targets(y: &[f64]) -> Result<()> {
    match y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::InvalidInput(format!("targets must be scaled to [0,1], found {v}"))),
        None => Ok(()),
    }
}

fn r2(y: &[f64], pred: &[f64]) -> Option<f64> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let sse: f64 = y.iter().zip(pred).map(|(a, b)| (a - b).powi(2)).sum();
    (sst > 0.0).then(|| 1.0 - sse / sst)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchReport {
    pub modality: Modality,
    pub val_mse: f64,
    pub val_r2: Option<f64>,
    pub fit: FitReport,
}

/// Trains one expert on its own modality with plain MSE and keeps the
/// weights of the best validation epoch.
pub fn phase1_train(
    branch: &mut ExpertBranch,
    train_x: &Matrix,
    train_y: &[f64],
    val_x: &Matrix,
    val_y: &[f64],
    cfg: &FitConfig,
    seed: u64,
) -> Result<BranchReport> {
    check_unit_targets(train_y)?;
    check_unit_targets(val_y)?;
    if train_x.rows() != train_y.len() || val_x.rows() != val_y.len() {
        return Err(Error::dim(format!("{} phase-1 rows", branch.modality), train_y.len(), train_x.rows()));
    }
    let mut rng = seeded(derive_seed(seed, &format!("phase1/{}", branch.modality)));
    let mut opt = Optimizer::adam(cfg.lr);
    let clip = cfg.clip_norm;
    let eval = |b: &ExpertBranch| -> Result<f64> { mse(b.infer(val_x)?.1.as_slice(), val_y) };
    let report = fit(
        branch,
        train_y.len(),
        cfg,
        &mut rng,
        false,
        |b, batch, lr, rng| {
            let xb = train_x.select_rows(batch);
            let yb = Matrix::column(&batch.iter().map(|&i| train_y[i]).collect::<Vec<_>>());
            b.zero_grad();
            let (_, pred, trace) = b.forward(&xb, Mode::Train, rng)?;
            let (loss, g) = crate::nn::mse_loss(&pred, &yb)?;
            b.backward(&trace, &g, None)?;
            let mut params = b.params_mut();
            clip_grad_norm(&mut params, clip)?;
            opt.lr = lr;
            opt.step(&mut params)?;
            Ok(loss)
        },
        eval,
    )?;
    branch.pretrained = true;
    let pred = branch.infer(val_x)?.1;
    Ok(BranchReport {
        modality: branch.modality,
        val_mse: mse(pred.as_slice(), val_y)?,
        val_r2: r2(val_y, pred.as_slice()),
        fit: report,
    })
}

/// Phase 1 for all three experts; they are independent and run in parallel.
pub fn phase1_train_all(
    model: &mut GameNet,
    train: &MultiModalSet,
    val: &MultiModalSet,
    cfg: &FitConfig,
    seed: u64,
) -> Result<Vec<BranchReport>> {
    model
        .branches
        .par_iter_mut()
        .enumerate()
        .map(|(i, b)| phase1_train(b, &train.xs[i], &train.y, &val.xs[i], &val.y, cfg, seed))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Phase2Config {
    pub fit: FitConfig,
    /// Decoupled weight decay for the gate; branches use their own.
    pub gate_weight_decay: f64,
    pub loss: LossWeights,
    /// Update branch weights jointly with the gate.
    pub fine_tune: bool,
}

impl Default for Phase2Config {
    fn default() -> Self {
        Self {
            fit: FitConfig {
                lr: 5e-6,
                max_epochs: 100,
                ..FitConfig::default()
            },
            gate_weight_decay: 0.01,
            loss: LossWeights::default(),
            fine_tune: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phase2Report {
    pub fine_tune: bool,
    /// Ensemble MSE of the uniform-gate starting point.
    pub initial_val_mse: f64,
    pub val_mse: f64,
    pub val_r2: Option<f64>,
    pub mean_alpha: [f64; 3],
    pub fit: FitReport,
}

struct Optimizers {
    gate: Optimizer,
    branches: Vec<Optimizer>,
}

impl Optimizers {
    fn step(&mut self, model: &mut GameNet, fine_tune: bool, lr: f64, clip: f64) -> Result<()> {
        let GameNet { branches, gate } = model;
        let mut gate_params = gate.params_mut();
        let mut branch_params: Vec<Vec<&mut ParamTensor>> = if fine_tune {
            branches.iter_mut().map(ExpertBranch::params_mut).collect()
        } else {
            Vec::new()
        };
        let norm_sq = |ps: &[&mut ParamTensor]| ps.iter().map(|p| p.grad.sum_sq()).sum::<f64>();
        let total = (norm_sq(&gate_params) + branch_params.iter().map(|p| norm_sq(p)).sum::<f64>()).sqrt();
        if !total.is_finite() {
            return Err(Error::NonFinite("phase-2 gradient".into()));
        }
        if total > clip {
            let k = clip / total;
            for p in gate_params.iter_mut().chain(branch_params.iter_mut().flatten()) {
                p.grad.scale(k);
            }
        }
        self.gate.lr = lr;
        self.gate.step(&mut gate_params)?;
        for (opt, params) in self.branches.iter_mut().zip(&mut branch_params) {
            opt.lr = lr;
            opt.step(params)?;
        }
        Ok(())
    }
}

/// Trains the gate on top of pretrained experts under the composite loss.
///
/// The uniform-gate model counts as the initial best, so the returned
/// model never validates worse than equal weighting of the experts.
pub fn phase2_train(model: &mut GameNet, train: &MultiModalSet, val: &MultiModalSet, cfg: &Phase2Config, seed: u64) -> Result<Phase2Report> {
    if let Some(b) = model.branches.iter().find(|b| !b.pretrained) {
        return Err(Error::State(format!("{} branch has not finished phase 1", b.modality)));
    }
    cfg.loss.validate()?;
    check_unit_targets(&train.y)?;
    check_unit_targets(&val.y)?;
    let mut rng = seeded(derive_seed(seed, "phase2"));
    let mut opts = Optimizers {
        gate: Optimizer::adamw(cfg.fit.lr, cfg.gate_weight_decay),
        branches: model.branches.iter().map(|b| Optimizer::adamw(cfg.fit.lr, b.config.weight_decay)).collect(),
    };
    // Frozen experts are deterministic, so their outputs are computed once.
    let cached = if cfg.fine_tune {
        None
    } else {
        Some(model.branch_outputs(train.refs())?)
    };
    let clip = cfg.fit.clip_norm;
    let eval = |m: &GameNet| -> Result<f64> { mse(&m.infer(val.refs())?.y, &val.y) };
    let initial_val_mse = eval(model)?;
    let report = fit(
        model,
        train.len(),
        &cfg.fit,
        &mut rng,
        true,
        |m, batch, lr, rng| {
            m.zero_grad();
            let yb: Vec<f64> = batch.iter().map(|&i| train.y[i]).collect();
            let (pred, trace) = match &cached {
                Some((hs, by)) => {
                    let hb: Vec<Matrix> = hs.iter().map(|h| h.select_rows(batch)).collect();
                    m.fuse(&hb.iter().collect::<Vec<_>>(), by.select_rows(batch), Mode::Train, rng)?
                }
                None => {
                    let xb = [0, 1, 2].map(|i| train.xs[i].select_rows(batch));
                    m.forward([&xb[0], &xb[1], &xb[2]], Mode::Train, false, rng)?
                }
            };
            let (terms, grads) = total_loss(&yb, &pred, &cfg.loss)?;
            m.backward(&trace, &grads)?;
            opts.step(m, cfg.fine_tune, lr, clip)?;
            Ok(terms.total)
        },
        eval,
    )?;
    let pred = model.infer(val.refs())?;
    let n = pred.alpha.rows().max(1) as f64;
    let mean_alpha = [0, 1, 2].map(|i| pred.alpha.col_values(i).iter().sum::<f64>() / n);
    Ok(Phase2Report {
        fine_tune: cfg.fine_tune,
        initial_val_mse,
        val_mse: mse(&pred.y, &val.y)?,
        val_r2: r2(&val.y, &pred.y),
        mean_alpha,
        fit: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::gamenet::GameNetConfig;
    use crate::model::{BranchConfig, GateConfig};
    use crate::nn::rng::seeded;
    use crate::nn::Activation;
    use rand::Rng as _;

    fn tiny() -> GameNetConfig {
        let b = |act| BranchConfig {
            hidden: vec![8, 4],
            activation: act,
            batchnorm: true,
            dropout: vec![0.0, 0.0],
            weight_decay: 0.0,
        };
        GameNetConfig {
            audio: b(Activation::Elu { alpha: 0.1 }),
            lyrics: b(Activation::Elu { alpha: 0.1 }),
            social: b(Activation::LeakyRelu { slope: 0.05 }),
            gate: GateConfig {
                hidden: vec![6],
                ..Default::default()
            },
        }
    }

    fn planted(n: usize, seed: u64) -> MultiModalSet {
        let mut rng = seeded(seed);
        let mut m = |c| Matrix::new(n, c, (0..n * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let xs = [m(3), m(3), m(2)];
        let y = (0..n).map(|r| 0.5 + 0.2 * xs[2].get(r, 0) - 0.1 * xs[2].get(r, 1)).collect();
        MultiModalSet::new(xs, y).unwrap()
    }

    #[test]
    fn unscaled_targets_are_rejected() {
        let mut rng = seeded(0);
        let mut model = GameNet::new([3, 3, 2], &tiny(), &mut rng).unwrap();
        let x = Matrix::zeros(4, 3);
        let err = phase1_train(&mut model.branches[0], &x, &[0.1, 0.2, 40.0, 0.3], &x, &[0.1; 4], &FitConfig::default(), 0);
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn gate_before_phase1_is_a_state_error() {
        let mut rng = seeded(0);
        let mut model = GameNet::new([3, 3, 2], &tiny(), &mut rng).unwrap();
        let d = planted(20, 1);
        let err = phase2_train(&mut model, &d, &d, &Phase2Config::default(), 0).unwrap_err();
        assert!(matches!(err, Error::State(_)));
    }

    #[test]
    fn frozen_phase2_only_moves_gate() {
        let train = planted(300, 2);
        let val = planted(100, 3);
        let mut model = GameNet::new([3, 3, 2], &tiny(), &mut seeded(4)).unwrap();
        let fit_cfg = FitConfig { lr: 1e-2, max_epochs: 15, batch_size: 64, ..Default::default() };
        let reports = phase1_train_all(&mut model, &train, &val, &fit_cfg, 9).unwrap();
        assert!(reports[2].val_r2.unwrap() > reports[0].val_r2.unwrap());
        let before = serde_json::to_string(&model.branches).unwrap();
        let cfg = Phase2Config {
            fit: FitConfig { lr: 1e-2, max_epochs: 10, batch_size: 64, ..Default::default() },
            fine_tune: false,
            ..Default::default()
        };
        let rep = phase2_train(&mut model, &train, &val, &cfg, 9).unwrap();
        assert_eq!(serde_json::to_string(&model.branches).unwrap(), before);
        assert!(rep.val_mse <= rep.initial_val_mse);
        assert!(rep.mean_alpha[2] > 1.0 / 3.0);
    }
}

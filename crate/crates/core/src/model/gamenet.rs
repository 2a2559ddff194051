use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::branch::{BranchConfig, BranchTrace, ExpertBranch, Modality};
use super::gate::{Gate, GateConfig, GateTrace};
use crate::error::{Error, Result};
use crate::nn::rng::Rng;
use crate::nn::{Matrix, Mode, ParamTensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameNetConfig {
    pub audio: BranchConfig,
    pub lyrics: BranchConfig,
    pub social: BranchConfig,
    pub gate: GateConfig,
}

impl Default for GameNetConfig {
    fn default() -> Self {
        Self {
            audio: BranchConfig::default_for(Modality::Audio),
            lyrics: BranchConfig::default_for(Modality::Lyrics),
            social: BranchConfig::default_for(Modality::Social),
            gate: GateConfig::default(),
        }
    }
}

impl GameNetConfig {
    pub fn branch(&self, m: Modality) -> &BranchConfig {
        match m {
            Modality::Audio => &self.audio,
            Modality::Lyrics => &self.lyrics,
            Modality::Social => &self.social,
        }
    }
}

/// Feature matrices of the three modalities over the same rows, plus the
/// scaled target.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiModalSet {
    pub xs: [Matrix; 3],
    pub y: Vec<f64>,
}

impl MultiModalSet {
    pub fn new(xs: [Matrix; 3], y: Vec<f64>) -> Result<Self> {
        for (m, x) in Modality::ALL.iter().zip(&xs) {
            if x.rows() != y.len() {
                return Err(Error::dim(format!("{m} rows"), y.len(), x.rows()));
            }
            x.ensure_finite(&format!("{m} features"))?;
        }
        Ok(Self { xs, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            xs: [0, 1, 2].map(|i| self.xs[i].select_rows(idx)),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }

    pub fn refs(&self) -> [&Matrix; 3] {
        [&self.xs[0], &self.xs[1], &self.xs[2]]
    }

    pub fn target(&self) -> Matrix {
        Matrix::column(&self.y)
    }
}

/// Ensemble output for a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub y: Vec<f64>,
    /// Fusion weights, one row per sample.
    pub alpha: Matrix,
    /// Per-branch predictions, one column per modality.
    pub branch_y: Matrix,
}

/// `Σ α_i ŷ_i` per row, clamped to the row's branch range so rounding
/// can never push it outside the convex hull.
pub fn combine(alpha: &Matrix, branch_y: &Matrix) -> Result<Vec<f64>> {
    if alpha.shape() != branch_y.shape() {
        return Err(Error::dim("fusion weights", format!("{:?}", branch_y.shape()), format!("{:?}", alpha.shape())));
    }
    Ok((0..alpha.rows())
        .map(|r| {
            let a = alpha.row(r);
            let b = branch_y.row(r);
            let v: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            v.clamp(lo, hi)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_final: f64,
    pub lambda_individual: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_final: 1.0,
            lambda_individual: 0.3,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v >= 0.0 && v.is_finite();
        if !ok(self.lambda_final) || !ok(self.lambda_individual) {
            return Err(Error::Config("loss weights must be finite and >= 0".into()));
        }
        if self.lambda_final == 0.0 && self.lambda_individual == 0.0 {
            return Err(Error::Config("loss weights are both zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub final_mse: f64,
    pub individual: [f64; 3],
    pub total: f64,
}

pub struct LossGrads {
    /// Gradient on the ensemble prediction, n×1.
    pub y: Matrix,
    /// Gradient on each branch prediction, n×3.
    pub branch_y: Matrix,
}

/// `λf·MSE(y, ŷ) + λi·Σ MSE(y, ŷ_i)` and its gradients.
pub fn total_loss(y: &[f64], pred: &Prediction, w: &LossWeights) -> Result<(LossTerms, LossGrads)> {
    w.validate()?;
    let n = y.len();
    if n == 0 || pred.y.len() != n || pred.branch_y.rows() != n || pred.branch_y.cols() != 3 {
        return Err(Error::dim("loss inputs", n, pred.y.len()));
    }
    let nf = n as f64;
    let mut grad_y = Matrix::zeros(n, 1);
    let mut grad_b = Matrix::zeros(n, 3);
    let mut final_mse = 0.0;
    let mut individual = [0.0; 3];
    for (r, &target) in y.iter().enumerate() {
        let e = pred.y[r] - target;
        final_mse += e * e / nf;
        grad_y.set(r, 0, w.lambda_final * 2.0 * e / nf);
        for (i, ind) in individual.iter_mut().enumerate() {
            let e = pred.branch_y.get(r, i) - target;
            *ind += e * e / nf;
            grad_b.set(r, i, w.lambda_individual * 2.0 * e / nf);
        }
    }
    let total = w.lambda_final * final_mse + w.lambda_individual * individual.iter().sum::<f64>();
    Ok((LossTerms { final_mse, individual, total }, LossGrads { y: grad_y, branch_y: grad_b }))
}

/// Three modality experts fused by a softmax gate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameNet {
    /// Ordered audio, lyrics, social.
    pub branches: Vec<ExpertBranch>,
    pub gate: Gate,
}

pub struct GameTrace {
    branches: Option<Vec<BranchTrace>>,
    gate: GateTrace,
    alpha: Matrix,
    branch_y: Matrix,
}

impl GameNet {
    pub fn new(input_dims: [usize; 3], config: &GameNetConfig, rng: &mut Rng) -> Result<Self> {
        let branches = Modality::ALL
            .iter()
            .zip(input_dims)
            .map(|(&m, d)| ExpertBranch::new(m, d, config.branch(m).clone(), rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_branches(branches, config.gate.clone(), rng)
    }

    /// Wraps already built (typically pretrained) experts with a fresh gate.
    pub fn from_branches(branches: Vec<ExpertBranch>, gate: GateConfig, rng: &mut Rng) -> Result<Self> {
        let order: Vec<Modality> = branches.iter().map(|b| b.modality).collect();
        if order != Modality::ALL {
            return Err(Error::InvalidInput(format!("branches must be ordered audio, lyrics, social, got {order:?}")));
        }
        let dims: Vec<usize> = branches.iter().map(ExpertBranch::repr_dim).collect();
        let gate = Gate::new(&dims, gate, rng)?;
        Ok(Self { branches, gate })
    }

    pub fn input_dims(&self) -> [usize; 3] {
        [0, 1, 2].map(|i| self.branches[i].input_dim())
    }

    pub fn branch(&self, m: Modality) -> &ExpertBranch {
        &self.branches[m.index()]
    }

    pub fn branch_mut(&mut self, m: Modality) -> &mut ExpertBranch {
        &mut self.branches[m.index()]
    }

    fn check_rows(xs: &[&Matrix; 3]) -> Result<usize> {
        let n = xs[0].rows();
        for (m, x) in Modality::ALL.iter().zip(xs) {
            if x.rows() != n {
                return Err(Error::dim(format!("{m} batch size"), n, x.rows()));
            }
        }
        Ok(n)
    }

    /// Representations and predictions of every branch in eval mode.
    pub fn branch_outputs(&self, xs: [&Matrix; 3]) -> Result<(Vec<Matrix>, Matrix)> {
        Self::check_rows(&xs)?;
        let mut hs = Vec::with_capacity(3);
        let mut ys = Vec::with_capacity(3);
        for (b, x) in self.branches.iter().zip(xs) {
            let (h, y) = b.infer(x)?;
            hs.push(h);
            ys.push(y);
        }
        Ok((hs, Matrix::hcat(&ys.iter().collect::<Vec<_>>())?))
    }

    pub fn infer(&self, xs: [&Matrix; 3]) -> Result<Prediction> {
        let (hs, branch_y) = self.branch_outputs(xs)?;
        let alpha = self.gate.infer(&hs.iter().collect::<Vec<_>>())?;
        let y = combine(&alpha, &branch_y)?;
        Ok(Prediction { y, alpha, branch_y })
    }

    /// Training forward pass. With `frozen` the branches run in eval mode
    /// and receive no gradient.
    pub fn forward(&mut self, xs: [&Matrix; 3], mode: Mode, frozen: bool, rng: &mut Rng) -> Result<(Prediction, GameTrace)> {
        if frozen {
            let (hs, branch_y) = self.branch_outputs(xs)?;
            return self.fuse(&hs.iter().collect::<Vec<_>>(), branch_y, mode, rng);
        }
        Self::check_rows(&xs)?;
        let mut hs = Vec::with_capacity(3);
        let mut ys = Vec::with_capacity(3);
        let mut traces = Vec::with_capacity(3);
        for (b, x) in self.branches.iter_mut().zip(xs) {
            let (h, y, t) = b.forward(x, mode, rng)?;
            hs.push(h);
            ys.push(y);
            traces.push(t);
        }
        let branch_y = Matrix::hcat(&ys.iter().collect::<Vec<_>>())?;
        let (pred, mut trace) = self.fuse(&hs.iter().collect::<Vec<_>>(), branch_y, mode, rng)?;
        trace.branches = Some(traces);
        Ok((pred, trace))
    }

    /// Gate and combination on precomputed branch outputs.
    pub fn fuse(&mut self, hs: &[&Matrix], branch_y: Matrix, mode: Mode, rng: &mut Rng) -> Result<(Prediction, GameTrace)> {
        let (alpha, gate) = self.gate.forward(hs, mode, rng)?;
        let y = combine(&alpha, &branch_y)?;
        let trace = GameTrace {
            branches: None,
            gate,
            alpha: alpha.clone(),
            branch_y: branch_y.clone(),
        };
        Ok((Prediction { y, alpha, branch_y }, trace))
    }

    /// Accumulates gradients of the gate and, if the forward pass was not
    /// frozen, of every branch.
    pub fn backward(&mut self, trace: &GameTrace, grads: &LossGrads) -> Result<()> {
        let n = trace.alpha.rows();
        if grads.y.shape() != (n, 1) || grads.branch_y.shape() != (n, 3) {
            return Err(Error::dim("ensemble backward", n, grads.y.rows()));
        }
        let mut g_alpha = Matrix::zeros(n, 3);
        let mut g_by = grads.branch_y.clone();
        for r in 0..n {
            let g = grads.y.get(r, 0);
            for i in 0..3 {
                g_alpha.set(r, i, g * trace.branch_y.get(r, i));
                g_by.set(r, i, g_by.get(r, i) + g * trace.alpha.get(r, i));
            }
        }
        let g_h = self.gate.backward(&trace.gate, &g_alpha)?;
        if let Some(traces) = &trace.branches {
            for (i, (b, t)) in self.branches.iter_mut().zip(traces).enumerate() {
                b.backward(t, &g_by.col_range(i, i + 1)?, Some(&g_h[i]))?;
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.gate.zero_grad();
        self.branches.iter_mut().for_each(ExpertBranch::zero_grad);
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut p = self.gate.params_mut();
        for b in &mut self.branches {
            p.extend(b.params_mut());
        }
        p
    }

    pub fn param_count(&self) -> usize {
        self.gate.param_count() + self.branches.iter().map(ExpertBranch::param_count).sum::<usize>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub n: usize,
    pub mean_alpha: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub n: usize,
    pub mean_alpha: [f64; 3],
    pub groups: BTreeMap<String, GroupMeans>,
    #[serde(skip)]
    pub alpha: Option<Matrix>,
}

fn mean_rows(alpha: &Matrix, rows: impl Iterator<Item = usize>) -> GroupMeans {
    let mut sum = [0.0; 3];
    let mut n = 0;
    for r in rows {
        for (s, a) in sum.iter_mut().zip(alpha.row(r)) {
            *s += a;
        }
        n += 1;
    }
    GroupMeans {
        n,
        mean_alpha: sum.map(|s| s / n.max(1) as f64),
    }
}

/// Mean fusion weights per group key.
pub fn group_alpha_means(alpha: &Matrix, keys: &[String]) -> Result<BTreeMap<String, GroupMeans>> {
    if keys.len() != alpha.rows() {
        return Err(Error::dim("gate group keys", alpha.rows(), keys.len()));
    }
    let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        members.entry(k).or_default().push(i);
    }
    Ok(members
        .into_iter()
        .map(|(k, rows)| (k.to_string(), mean_rows(alpha, rows.into_iter())))
        .collect())
}

/// Mean fusion weights over a dataset, optionally broken down by a
/// per-row group key.
pub fn gate_report(model: &GameNet, xs: [&Matrix; 3], groups: Option<&[String]>) -> Result<GateReport> {
    let alpha = model.infer(xs)?.alpha;
    let groups = match groups {
        Some(keys) => group_alpha_means(&alpha, keys)?,
        None => BTreeMap::new(),
    };
    Ok(GateReport {
        n: alpha.rows(),
        mean_alpha: mean_rows(&alpha, 0..alpha.rows()).mean_alpha,
        groups,
        alpha: Some(alpha),
    })
}

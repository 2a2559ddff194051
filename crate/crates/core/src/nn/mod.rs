//! Minimal dense-network engine: matrices, layers with exact backward
//! passes, losses, optimizers and the training-control state machines.

mod activation;
mod batch;
mod checkpoint;
mod control;
mod fit;
mod layer;
mod loss;
mod matrix;
mod network;
mod optim;
pub mod rng;

pub use activation::{
    activation_forward, sigmoid, softmax, softmax_rows, softmax_rows_backward, Activation,
    SIGMOID_LOGIT_LIMIT,
};
pub use batch::epoch_batches;
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use control::{
    clip_grad_norm, EarlyStopping, PlateauConfig, PlateauScheduler, StopDecision, TrainControl,
    IMPROVEMENT_TOLERANCE,
};
pub use fit::{fit, EpochLog, FitConfig, FitReport};
pub use layer::{BatchNorm, DenseLayer, DenseLayerSpec, DenseTrace, Mode, ParamTensor, BN_EPS, BN_MOMENTUM};
pub use loss::{mse, mse_loss};
pub use matrix::Matrix;
pub use network::{NetTrace, Network};
pub use optim::{zero_grads, Optimizer, OptimizerKind};

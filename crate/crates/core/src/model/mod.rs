//! Modality experts, the learnable-standardization gate, the fused
//! prediction and the two training phases.

mod branch;
mod bundle;
mod gamenet;
mod gate;
mod train;

pub use branch::{BranchConfig, BranchTrace, ExpertBranch, Modality, REPR_DIM};
pub use bundle::{load_branches, load_manifest, load_model, save_bundle, BranchEntry, BundleManifest, BundleScalers, BUNDLE_MANIFEST};
pub use gamenet::{
    combine, gate_report, group_alpha_means, total_loss, GameNet, GameNetConfig, GameTrace, GateReport, GroupMeans, LossGrads, LossTerms, LossWeights,
    MultiModalSet, Prediction,
};
pub use gate::{standardize, Gate, GateConfig, GateTrace, GATE_EPS};
pub use train::{phase1_train, phase1_train_all, phase2_train, validation_split, BranchReport, Phase2Config, Phase2Report};

//! Group-wise autoencoders that compress the raw audio feature space.

mod autoencoder;
mod ensemble;
mod loss;
mod plan;
mod registry;

pub use autoencoder::{
    holdout_split, train_group_autoencoder, AeTrainConfig, GroupAutoencoder, GroupReport, Standardizer,
    DEGENERATE_STD,
};
pub use ensemble::{train_ensemble, EnsembleManifest, ManifestGroup, OnionEnsemble};
pub use loss::{ae_loss, rel_mse, AeLossGrads, AeLossTerms};
pub use plan::{lambda_for, plan_architecture, AeArchitecture, AE_DROPOUT, AE_ELU_ALPHA};
pub use registry::{FeatureGroup, Registry, REFERENCE_GROUPS};

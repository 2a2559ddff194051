use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::branch::{ExpertBranch, Modality};
use super::gamenet::GameNet;
use super::gate::Gate;
use crate::data::Scaler;
use crate::error::{Error, Result};
use crate::nn::Checkpoint;

pub const BUNDLE_MANIFEST: &str = "manifest.json";

/// Feature and target scaling that travels with a trained model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleScalers {
    /// Ordered audio, lyrics, social.
    pub features: Vec<Scaler>,
    pub target: Scaler,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchEntry {
    pub modality: Modality,
    pub file: String,
    pub input_dim: usize,
    pub pretrained: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub seed: u64,
    pub branches: Vec<BranchEntry>,
    /// Absent until phase 2 has trained a gate.
    pub gate: Option<String>,
    pub scalers: BundleScalers,
}

fn branch_file(m: Modality) -> String {
    format!("branch_{m}.json")
}

/// Writes the three experts, the gate (if any) and a manifest into `dir`.
pub fn save_bundle(dir: &Path, seed: u64, branches: &[ExpertBranch], gate: Option<&Gate>, scalers: &BundleScalers) -> Result<BundleManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for b in branches {
        let file = branch_file(b.modality);
        Checkpoint::new(seed, b.clone()).save(&dir.join(&file))?;
        entries.push(BranchEntry {
            modality: b.modality,
            file,
            input_dim: b.input_dim(),
            pretrained: b.pretrained,
        });
    }
    let gate_file = match gate {
        Some(g) => {
            Checkpoint::new(seed, g.clone()).save(&dir.join("gate.json"))?;
            Some("gate.json".to_string())
        }
        None => None,
    };
    let manifest = BundleManifest {
        seed,
        branches: entries,
        gate: gate_file,
        scalers: scalers.clone(),
    };
    let path = dir.join(BUNDLE_MANIFEST);
    fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<BundleManifest> {
    let path = dir.join(BUNDLE_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads the experts in audio, lyrics, social order.
pub fn load_branches(dir: &Path, manifest: &BundleManifest) -> Result<Vec<ExpertBranch>> {
    Modality::ALL
        .iter()
        .map(|&m| {
            let entry = manifest
                .branches
                .iter()
                .find(|e| e.modality == m)
                .ok_or_else(|| Error::InvalidInput(format!("bundle has no {m} branch")))?;
            let b = Checkpoint::<ExpertBranch>::load(&dir.join(&entry.file))?.model;
            if b.modality != m || b.input_dim() != entry.input_dim {
                return Err(Error::InvalidInput(format!("bundle entry {} does not match its checkpoint", entry.file)));
            }
            Ok(b)
        })
        .collect()
}

/// Loads a complete model; fails if phase 2 has not produced a gate.
pub fn load_model(dir: &Path) -> Result<(GameNet, BundleManifest)> {
    let manifest = load_manifest(dir)?;
    let branches = load_branches(dir, &manifest)?;
    let gate_file = manifest
        .gate
        .as_ref()
        .ok_or_else(|| Error::State(format!("bundle {} has no trained gate", dir.display())))?;
    let gate = Checkpoint::<Gate>::load(&dir.join(gate_file))?.model;
    for (i, b) in branches.iter().enumerate() {
        if gate.mu[i].len() != b.repr_dim() {
            return Err(Error::dim(format!("gate input for {}", b.modality), b.repr_dim(), gate.mu[i].len()));
        }
    }
    Ok((GameNet { branches, gate }, manifest))
}

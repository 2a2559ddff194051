use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::autoencoder::{train_group_autoencoder, AeTrainConfig, GroupAutoencoder, GroupReport};
use super::registry::Registry;
use crate::error::{Error, Result};
use crate::nn::{Checkpoint, Matrix};

/// One trained autoencoder per registry group.
#[derive(Clone, Debug, PartialEq)]
pub struct OnionEnsemble {
    pub registry: Registry,
    pub groups: Vec<GroupAutoencoder>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleManifest {
    pub registry: Registry,
    pub registry_sha256: String,
    pub seed: u64,
    pub groups: Vec<ManifestGroup>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestGroup {
    pub name: String,
    pub checkpoint: String,
    pub val_rel_mse: f64,
    pub degenerate_columns: Vec<usize>,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

fn group_columns(registry: &Registry, raw: &Matrix, i: usize) -> Result<Matrix> {
    let g = &registry.groups[i];
    if raw.cols() < g.end {
        return Err(Error::dim(
            format!("audio columns for group {:?}", g.name),
            format!("at least {} columns", g.end),
            format!("{} columns", raw.cols()),
        ));
    }
    raw.col_range(g.start, g.end)
}

/// Trains every group independently; groups run in parallel on the
/// current rayon pool and each draws from its own seed stream.
pub fn train_ensemble(registry: &Registry, raw: &Matrix, cfg: &AeTrainConfig, seed: u64) -> Result<(OnionEnsemble, Vec<GroupReport>)> {
    registry.validate()?;
    let slices = (0..registry.groups.len())
        .map(|i| group_columns(registry, raw, i))
        .collect::<Result<Vec<_>>>()?;
    let trained = registry
        .groups
        .par_iter()
        .zip(slices.par_iter())
        .map(|(g, x)| train_group_autoencoder(g, x, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let (groups, reports) = trained.into_iter().unzip();
    Ok((
        OnionEnsemble {
            registry: registry.clone(),
            groups,
        },
        reports,
    ))
}

impl OnionEnsemble {
    pub fn output_dim(&self) -> usize {
        self.registry.total_bottleneck()
    }

    /// Eval-mode bottleneck codes of every group, concatenated in
    /// registry order.
    pub fn compress(&self, raw: &Matrix) -> Result<Matrix> {
        let codes = self
            .groups
            .iter()
            .enumerate()
            .map(|(i, ae)| ae.encode(&group_columns(&self.registry, raw, i)?))
            .collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Matrix> = codes.iter().collect();
        Matrix::hcat(&refs)
    }

    /// Names for the compressed columns: `<group>_z<k>`.
    pub fn output_names(&self) -> Vec<String> {
        self.registry
            .groups
            .iter()
            .flat_map(|g| (0..g.d_enc).map(move |k| format!("{}_z{k}", g.name)))
            .collect()
    }

    pub fn save(&self, dir: &Path, seed: u64, reports: &[GroupReport]) -> Result<()> {
        let mut groups = Vec::new();
        for (ae, rep) in self.groups.iter().zip(reports) {
            let file = format!("group_{}.json", ae.group.name);
            Checkpoint::new(seed, ae.clone()).save(&dir.join(&file))?;
            groups.push(ManifestGroup {
                name: ae.group.name.clone(),
                checkpoint: file,
                val_rel_mse: rep.val_rel_mse,
                degenerate_columns: rep.degenerate_columns.clone(),
                epochs_run: rep.fit.epochs_run,
                best_epoch: rep.fit.best_epoch,
            });
        }
        let manifest = EnsembleManifest {
            registry: self.registry.clone(),
            registry_sha256: self.registry.sha256()?,
            seed,
            groups,
        };
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<(Self, EnsembleManifest)> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: EnsembleManifest = serde_json::from_str(&text)?;
        if manifest.registry.sha256()? != manifest.registry_sha256 {
            return Err(Error::InvalidInput("ensemble manifest registry hash mismatch".into()));
        }
        let mut groups = Vec::new();
        for (g, entry) in manifest.registry.groups.iter().zip(&manifest.groups) {
            let ae = Checkpoint::<GroupAutoencoder>::load(&dir.join(&entry.checkpoint))?.model;
            if &ae.group != g {
                return Err(Error::InvalidInput(format!("checkpoint for {:?} does not match the registry", g.name)));
            }
            groups.push(ae);
        }
        if groups.len() != manifest.registry.groups.len() {
            return Err(Error::InvalidInput("ensemble manifest is missing groups".into()));
        }
        Ok((
            Self {
                registry: manifest.registry.clone(),
                groups,
            },
            manifest,
        ))
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ctd::{CtdMode, YearWindow};
use crate::data::{CleaningConfig, ScalerKind, SplitLabel, SynthDatasetSpec};
use crate::error::{Error, Result};
use crate::model::{GameNetConfig, Phase2Config};
use crate::nn::FitConfig;
use crate::onion::AeTrainConfig;

/// File locations, all relative to the workspace root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub raw_dir: String,
    pub metadata: String,
    pub events: String,
    pub audio_raw: String,
    pub lyrics: String,
    /// Extra per-track social columns joined onto the trajectory features.
    pub social_meta: Option<String>,
    pub ae_registry: String,
    pub cleaned: String,
    pub split: String,
    pub ctd: String,
    pub ctd_schema: String,
    pub ae_dir: String,
    pub audio_embedding: String,
    pub model_dir: String,
    pub predictions: String,
    pub metrics: String,
    pub gate_report: String,
    pub manifests: String,
}

impl Default for Paths {
    fn default() -> Self {
        let s = String::from;
        Self {
            raw_dir: s("raw"),
            metadata: s("raw/metadata.csv"),
            events: s("raw/events.csv"),
            audio_raw: s("raw/audio_raw.csv"),
            lyrics: s("raw/lyrics_embeddings.csv"),
            social_meta: Some(s("raw/social_meta.csv")),
            ae_registry: s("raw/ae_registry.json"),
            cleaned: s("work/cleaned.csv"),
            split: s("work/split.csv"),
            ctd: s("work/ctd.csv"),
            ctd_schema: s("work/ctd_schema.json"),
            ae_dir: s("models/onion"),
            audio_embedding: s("work/audio_embedding.csv"),
            model_dir: s("models/gamenet"),
            predictions: s("out/predictions.csv"),
            metrics: s("out/metrics.json"),
            gate_report: s("out/gate_report.json"),
            manifests: s("manifests"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitParams {
    pub seed: u64,
    pub bins: usize,
    pub test_fraction: f64,
}

impl Default for SplitParams {
    fn default() -> Self {
        Self {
            seed: 42,
            bins: 5,
            test_fraction: 0.2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CtdParams {
    pub mode: CtdMode,
    pub window: YearWindow,
}

impl Default for CtdParams {
    fn default() -> Self {
        Self {
            mode: CtdMode::Temporal,
            window: YearWindow::default(),
        }
    }
}

/// Feature scaling per modality; the target is always popularity / 100.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalerKinds {
    pub audio: ScalerKind,
    pub lyrics: ScalerKind,
    pub social: ScalerKind,
}

impl Default for ScalerKinds {
    fn default() -> Self {
        Self {
            audio: ScalerKind::ZScore,
            lyrics: ScalerKind::Constant { k: 100.0 },
            social: ScalerKind::ZScore,
        }
    }
}

impl ScalerKinds {
    pub fn ordered(&self) -> [ScalerKind; 3] {
        [self.audio, self.lyrics, self.social]
    }
}

/// Everything a run needs besides its input files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub synth: SynthDatasetSpec,
    pub cleaning: CleaningConfig,
    pub split: SplitParams,
    pub ctd: CtdParams,
    pub autoencoder: AeTrainConfig,
    pub scalers: ScalerKinds,
    pub model: GameNetConfig,
    pub validation_fraction: f64,
    pub phase1: FitConfig,
    pub phase2: Phase2Config,
    /// Rows scored by `predict`, `evaluate` and `gate-report`.
    pub eval_split: SplitLabel,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 46,
            paths: Paths::default(),
            synth: SynthDatasetSpec::default(),
            cleaning: CleaningConfig::default(),
            split: SplitParams::default(),
            ctd: CtdParams::default(),
            autoencoder: AeTrainConfig::default(),
            scalers: ScalerKinds::default(),
            model: GameNetConfig::default(),
            validation_fraction: 0.1,
            phase1: FitConfig::default(),
            phase2: Phase2Config::default(),
            eval_split: SplitLabel::Test,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.cleaning.validate()?;
        self.phase1.validate()?;
        self.phase2.fit.validate()?;
        self.phase2.loss.validate()?;
        self.autoencoder.fit.validate()?;
        YearWindow::new(self.ctd.window.first, self.ctd.window.last)?;
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::Config(format!("validation fraction must be in (0,1), got {}", self.validation_fraction)));
        }
        if self.split.bins == 0 || !(0.0..1.0).contains(&self.split.test_fraction) {
            return Err(Error::Config("split needs bins >= 1 and a test fraction in [0,1)".into()));
        }
        Ok(())
    }

    /// Hash of the effective configuration, overrides included.
    pub fn sha256(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }
}

/// Resolves config-relative paths against the workspace root.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// A contiguous slice `[start, end)` of the raw audio columns and the
/// width it is compressed to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub name: String,
    pub start: usize,
    pub end: usize,
    pub d_enc: usize,
}

impl FeatureGroup {
    pub fn input_dim(&self) -> usize {
        self.end.saturating_sub(self.start)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub groups: Vec<FeatureGroup>,
}

/// Group names and widths of the reference audio feature set.
pub const REFERENCE_GROUPS: [(&str, usize, usize); 7] = [
    ("small_combined", 439, 128),
    ("bow_emobase_chroma", 1000, 216),
    ("blf", 4478, 510),
    ("essentia", 1034, 223),
    ("compare_audio_spectral", 2800, 605),
    ("compare_mfcc", 1400, 303),
    ("compare_pcm", 1700, 367),
];

impl Registry {
    /// Groups laid out back to back from column 0.
    pub fn contiguous(spec: &[(&str, usize, usize)]) -> Result<Self> {
        let mut start = 0;
        let groups = spec
            .iter()
            .map(|&(name, d, d_enc)| {
                let g = FeatureGroup {
                    name: name.to_string(),
                    start,
                    end: start + d,
                    d_enc,
                };
                start += d;
                g
            })
            .collect();
        let r = Self { groups };
        r.validate()?;
        Ok(r)
    }

    /// The seven-group reference layout; bottlenecks sum to 2352.
    pub fn reference() -> Self {
        Self::contiguous(&REFERENCE_GROUPS).expect("reference registry is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::Config("registry has no groups".into()));
        }
        for g in &self.groups {
            if g.input_dim() < 2 {
                return Err(Error::Config(format!("group {:?} needs at least 2 columns", g.name)));
            }
            if g.d_enc == 0 || g.d_enc >= g.input_dim() {
                return Err(Error::Config(format!(
                    "group {:?}: bottleneck {} must be in 1..{}",
                    g.name,
                    g.d_enc,
                    g.input_dim()
                )));
            }
        }
        let mut spans: Vec<&FeatureGroup> = self.groups.iter().collect();
        spans.sort_by_key(|g| g.start);
        for pair in spans.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(Error::Config(format!(
                    "groups {:?} and {:?} overlap",
                    pair[0].name, pair[1].name
                )));
            }
        }
        let mut names: Vec<&str> = self.groups.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate group name in registry".into()));
        }
        Ok(())
    }

    pub fn total_input(&self) -> usize {
        self.groups.iter().map(FeatureGroup::input_dim).sum()
    }

    pub fn total_bottleneck(&self) -> usize {
        self.groups.iter().map(|g| g.d_enc).sum()
    }

    /// Smallest column count a raw matrix needs to cover every group.
    pub fn required_columns(&self) -> usize {
        self.groups.iter().map(|g| g.end).max().unwrap_or(0)
    }

    pub fn sha256(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&json)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let r: Self = serde_json::from_str(&text)?;
        r.validate()?;
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::data::table::create_parent(path)?;
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_totals() {
        let r = Registry::reference();
        assert_eq!(r.groups.len(), 7);
        assert_eq!(r.total_bottleneck(), 2352);
        assert_eq!(r.total_input(), 12_851);
        assert_eq!(r.groups[0].d_enc, (0.292f64 * 439.0).round() as usize);
        assert_eq!(r.groups[2].d_enc, (0.114f64 * 4478.0).round() as usize);
    }

    #[test]
    fn invalid_registries() {
        assert!(Registry::contiguous(&[("a", 4, 4)]).is_err());
        let overlap = Registry {
            groups: vec![
                FeatureGroup { name: "a".into(), start: 0, end: 5, d_enc: 2 },
                FeatureGroup { name: "b".into(), start: 4, end: 8, d_enc: 2 },
            ],
        };
        assert!(overlap.validate().is_err());
    }
}

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::seq::index::sample;
use rand::{Rng as _, RngCore};
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::records::{save_records, TrackRecord};
use super::table::FeatureTable;
use crate::ctd::{write_events, ListeningEvent};
use crate::error::{Error, Result};
use crate::nn::rng::{derive_seed, seeded, Rng};
use crate::nn::Matrix;
use crate::onion::Registry;

/// Order of the three modalities in every per-modality array.
pub const MODALITY_NAMES: [&str; 3] = ["audio", "lyrics", "social"];

/// In-memory planted-signal dataset.
///
/// Each modality m has latent factors `z_m ~ N(0, I_k)` and features
/// `x_m = z_m A_m + noise`. The standardized target is
/// `y* = (Σ c_m g_m + σ ε) / sqrt(Σ c_m² + σ²)` with `g_m` a fixed unit
/// projection of `z_m`, and popularity is `round(35 + 15 y*)` clamped
/// to 0..=100.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub n: usize,
    pub dims: [usize; 3],
    pub latent_dim: usize,
    pub coefs: [f64; 3],
    pub target_noise: f64,
    pub feature_noise: f64,
    /// Multiplier applied to lyric features, mimicking small raw
    /// embedding magnitudes.
    pub lyrics_scale: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n: 1000,
            dims: [64, 128, 16],
            latent_dim: 4,
            coefs: [0.0, 0.0, 1.0],
            target_noise: 0.3,
            feature_noise: 0.1,
            lyrics_scale: 0.01,
            seed: 46,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthData {
    pub features: [Matrix; 3],
    pub latents: [Matrix; 3],
    /// `g_m` per modality, one value per row.
    pub signals: [Vec<f64>; 3],
    pub y_star: Vec<f64>,
    pub popularity: Vec<u8>,
}

impl SynthData {
    /// Popularity divided by 100, as a column.
    pub fn target(&self) -> Matrix {
        Matrix::column(&self.popularity.iter().map(|&p| f64::from(p) / 100.0).collect::<Vec<_>>())
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut Rng) -> Matrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    Matrix::new(rows, cols, data).expect("shape")
}

fn unit_vector(k: usize, rng: &mut Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.latent_dim == 0 || self.dims.contains(&0) {
            return Err(Error::Config("synthetic spec needs n >= 2 and positive dims".into()));
        }
        if self.coefs.iter().any(|c| !c.is_finite() || *c < 0.0) || !(self.target_noise >= 0.0) {
            return Err(Error::Config("signal coefficients and noise must be finite and >= 0".into()));
        }
        if self.coefs.iter().map(|c| c * c).sum::<f64>() + self.target_noise.powi(2) == 0.0 {
            return Err(Error::Config("target needs signal or noise".into()));
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<SynthData> {
        self.validate()?;
        let k = self.latent_dim;
        let mut latents = Vec::new();
        let mut features = Vec::new();
        let mut signals = Vec::new();
        for (m, name) in MODALITY_NAMES.iter().enumerate() {
            let mut rng = seeded(derive_seed(self.seed, &format!("synth/{name}")));
            let z = gaussian(self.n, k, &mut rng);
            let mut a = gaussian(k, self.dims[m], &mut rng);
            a.scale(1.0 / (k as f64).sqrt());
            let mut x = z.dot(&a);
            x.add_scaled(&gaussian(self.n, self.dims[m], &mut rng), self.feature_noise);
            if m == 1 {
                x.scale(self.lyrics_scale);
            }
            let w = unit_vector(k, &mut rng);
            signals.push(z.row_iter().map(|r| r.iter().zip(&w).map(|(a, b)| a * b).sum()).collect::<Vec<f64>>());
            latents.push(z);
            features.push(x);
        }
        let mut rng = seeded(derive_seed(self.seed, "synth/target"));
        let norm = (self.coefs.iter().map(|c| c * c).sum::<f64>() + self.target_noise.powi(2)).sqrt();
        let y_star: Vec<f64> = (0..self.n)
            .map(|i| {
                let eps: f64 = StandardNormal.sample(&mut rng);
                let s: f64 = (0..3).map(|m| self.coefs[m] * signals[m][i]).sum();
                (s + self.target_noise * eps) / norm
            })
            .collect();
        let popularity = y_star.iter().map(|y| (35.0 + 15.0 * y).round().clamp(0.0, 100.0) as u8).collect();
        let take3 = |mut v: Vec<Matrix>| -> [Matrix; 3] {
            let c = v.pop().expect("3");
            let b = v.pop().expect("3");
            let a = v.pop().expect("3");
            [a, b, c]
        };
        let s2 = signals.pop().expect("3");
        let s1 = signals.pop().expect("3");
        let s0 = signals.pop().expect("3");
        Ok(SynthData {
            features: take3(features),
            latents: take3(latents),
            signals: [s0, s1, s2],
            y_star,
            popularity,
        })
    }
}

/// A synthetic corpus laid out like a real one on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthDatasetSpec {
    pub n_tracks: usize,
    pub n_artists: usize,
    pub n_users: usize,
    /// `(name, width, bottleneck)` per raw audio group.
    pub audio_groups: Vec<(String, usize, usize)>,
    pub lyrics_dim: usize,
    pub social_meta_dim: usize,
    pub latent_dim: usize,
    pub coefs: [f64; 3],
    pub target_noise: f64,
    pub feature_noise: f64,
    /// Fraction of tracks that get no listening events at all.
    pub silent_fraction: f64,
    pub seed: u64,
}

impl Default for SynthDatasetSpec {
    fn default() -> Self {
        Self {
            n_tracks: 600,
            n_artists: 120,
            n_users: 400,
            audio_groups: vec![("timbre".into(), 24, 6), ("rhythm".into(), 40, 8), ("tonal".into(), 16, 4)],
            lyrics_dim: 32,
            social_meta_dim: 6,
            latent_dim: 4,
            coefs: [0.5, 0.5, 1.0],
            target_noise: 0.3,
            feature_noise: 0.1,
            silent_fraction: 0.04,
            seed: 46,
        }
    }
}

/// Relative paths written by [`write_dataset`].
pub const SYNTH_FILES: [&str; 6] = [
    "metadata.csv",
    "events.csv",
    "audio_raw.csv",
    "lyrics_embeddings.csv",
    "social_meta.csv",
    "ae_registry.json",
];

const WORDS: [&str; 12] = ["love", "night", "road", "fire", "home", "rain", "heart", "dance", "light", "gone", "dream", "city"];
const LANGUAGES: [(&str, u32); 6] = [("en", 70), ("instrumental", 8), ("pt", 8), ("es", 6), ("fr", 4), ("de", 4)];

fn year_start(year: i32) -> i64 {
    NaiveDate::from_ymd_opt(year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp())
        .expect("valid year")
}

fn pick_language(rng: &mut Rng) -> &'static str {
    let total: u32 = LANGUAGES.iter().map(|(_, w)| w).sum();
    let mut r = rng.random_range(0..total);
    for (lang, w) in LANGUAGES {
        if r < w {
            return lang;
        }
        r -= w;
    }
    "en"
}

fn fake_lyrics(rng: &mut Rng) -> String {
    let lines = rng.random_range(3..9);
    let mut out = Vec::new();
    for _ in 0..lines {
        let words: Vec<&str> = (0..rng.random_range(2..6)).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect();
        let mut line = words.join(if rng.random_bool(0.1) { "  " } else { " " });
        match rng.random_range(0..10) {
            0 => line.push_str(" [x2]"),
            1 => out.push("[Instrumental]".to_string()),
            _ => {}
        }
        out.push(line);
    }
    out.join(if rng.random_bool(0.2) { "\r\n" } else { "\n" })
}

fn poisson(lambda: f64, rng: &mut Rng) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).map(|p| p.sample(rng) as u64).unwrap_or(0)
}

fn table(prefix: &str, ids: &[String], values: Matrix) -> Result<FeatureTable> {
    let names = (0..values.cols()).map(|j| format!("{prefix}{j}")).collect();
    FeatureTable::new(ids.to_vec(), names, values)
}

/// Writes metadata, events, raw audio, lyric embeddings, extra social
/// columns and the autoencoder registry into `dir`.
///
/// The social latent drives both the listening events and the extra
/// social columns, so social-side features carry the social signal.
pub fn write_dataset(dir: &Path, spec: &SynthDatasetSpec) -> Result<Vec<PathBuf>> {
    if spec.n_tracks < 10 || spec.n_artists == 0 || spec.n_users < 2 || spec.social_meta_dim == 0 {
        return Err(Error::Config("synthetic dataset needs >= 10 tracks, artists, >= 2 users, social columns".into()));
    }
    let group_spec: Vec<(&str, usize, usize)> = spec.audio_groups.iter().map(|(n, d, e)| (n.as_str(), *d, *e)).collect();
    let registry = Registry::contiguous(&group_spec)?;
    let latent = SynthSpec {
        n: spec.n_tracks,
        dims: [registry.total_input(), spec.lyrics_dim, spec.social_meta_dim],
        latent_dim: spec.latent_dim,
        coefs: spec.coefs,
        target_noise: spec.target_noise,
        feature_noise: spec.feature_noise,
        lyrics_scale: 0.01,
        seed: spec.seed,
    }
    .generate()?;

    let ids: Vec<String> = (0..spec.n_tracks).map(|i| format!("trk{i:05}")).collect();
    let mut rng = seeded(derive_seed(spec.seed, "synth/metadata"));
    let records: Vec<TrackRecord> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| TrackRecord {
            track_id: id.clone(),
            artist_id: format!("art{:04}", i % spec.n_artists),
            release_year: rng.random_range(1950..=2020),
            language: pick_language(&mut rng).to_string(),
            popularity: latent.popularity[i],
            lyrics: fake_lyrics(&mut rng),
        })
        .collect();

    let mut rng = seeded(derive_seed(spec.seed, "synth/events"));
    let users: Vec<String> = (0..spec.n_users).map(|u| format!("usr{u:04}")).collect();
    let mut events = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        if rng.random_bool(spec.silent_fraction.clamp(0.0, 1.0)) {
            continue;
        }
        let g = latent.signals[2][i];
        for year in 2015..=2020 {
            let lambda = (1.2 + 0.7 * g + 0.1 * g * f64::from(year - 2018)).exp();
            let listeners = (poisson(lambda, &mut rng) as usize).min(spec.n_users);
            let start = year_start(year);
            let span = year_start(year + 1) - start;
            for u in sample(&mut rng, spec.n_users, listeners).iter() {
                let plays = 1 + poisson((-0.5 + 0.4 * g).exp(), &mut rng);
                for _ in 0..plays {
                    events.push(ListeningEvent {
                        user_id: users[u].clone(),
                        track_id: id.clone(),
                        timestamp: start + (rng.next_u64() % span as u64) as i64,
                    });
                }
            }
        }
    }
    events.sort_by(|a, b| (a.timestamp, &a.user_id, &a.track_id).cmp(&(b.timestamp, &b.user_id, &b.track_id)));

    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths: Vec<PathBuf> = SYNTH_FILES.iter().map(|f| dir.join(f)).collect();
    save_records(&records, &paths[0])?;
    let f = std::fs::File::create(&paths[1]).map_err(|e| Error::io(&paths[1], e))?;
    write_events(&events, std::io::BufWriter::new(f))?;
    let [audio, lyrics, social] = latent.features;
    table("a", &ids, audio)?.save(&paths[2])?;
    table("emb", &ids, lyrics)?.save(&paths[3])?;
    table("meta", &ids, social)?.save(&paths[4])?;
    registry.save(&paths[5])?;
    Ok(paths)
}

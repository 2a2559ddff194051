use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{compute_artist_ctd, compute_song_ctd, compute_track_year_stats, TrackYearStats};
use super::{ArtistCtd, EventCounts, SongCtd, YearWindow};
use crate::data::table::{create_parent, FeatureTable};
use crate::error::{Error, Result};
use crate::nn::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CtdMode {
    Aggregate,
    Temporal,
}

pub const SONG_FEATURES: [&str; 6] = [
    "song_total_plays",
    "song_unique_listeners",
    "song_repeat_listeners",
    "song_median_plays_per_listener",
    "song_loyalty_rate",
    "song_repeat_ratio",
];

pub const ARTIST_FEATURES: [&str; 5] = [
    "artist_loyalty_rate",
    "artist_loyalty_growth_rate",
    "artist_reach_growth_rate",
    "artist_loyalty_consistency",
    "artist_engagement_consistency",
];

/// Yearly metrics emitted per window year in temporal mode.
pub const YEARLY_METRICS: [&str; 4] = [
    "total_plays",
    "unique_listeners",
    "repeat_listeners",
    "median_plays_per_listener",
];

/// Ordered feature names plus the mode and window they were built for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CtdSchema {
    pub mode: CtdMode,
    pub first_year: i32,
    pub last_year: i32,
    pub features: Vec<String>,
}

enum Feature {
    Song(usize),
    Artist(usize),
    Yearly { metric: usize, year: i32 },
}

fn yearly_name(metric: &str, year: i32) -> String {
    format!("{metric}_{year}")
}

impl CtdSchema {
    pub fn default_for(mode: CtdMode, window: YearWindow) -> Self {
        let mut features: Vec<String> = SONG_FEATURES
            .iter()
            .chain(ARTIST_FEATURES.iter())
            .map(|s| s.to_string())
            .collect();
        if mode == CtdMode::Temporal {
            for year in window.years() {
                for metric in YEARLY_METRICS {
                    features.push(yearly_name(metric, year));
                }
            }
        }
        Self {
            mode,
            first_year: window.first,
            last_year: window.last,
            features,
        }
    }

    /// A configured subset or reordering of the known features.
    pub fn custom(mode: CtdMode, window: YearWindow, features: Vec<String>) -> Result<Self> {
        let schema = Self {
            mode,
            first_year: window.first,
            last_year: window.last,
            features,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn window(&self) -> YearWindow {
        YearWindow {
            first: self.first_year,
            last: self.last_year,
        }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn resolve(&self, name: &str) -> Result<Feature> {
        if let Some(i) = SONG_FEATURES.iter().position(|f| *f == name) {
            return Ok(Feature::Song(i));
        }
        if let Some(i) = ARTIST_FEATURES.iter().position(|f| *f == name) {
            return Ok(Feature::Artist(i));
        }
        for (metric, prefix) in YEARLY_METRICS.iter().enumerate() {
            let year = name
                .strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('_'))
                .and_then(|y| y.parse::<i32>().ok());
            if let Some(year) = year {
                if self.mode != CtdMode::Temporal {
                    return Err(Error::Config(format!("yearly feature {name:?} in an aggregate schema")));
                }
                if !self.window().contains(year) {
                    return Err(Error::Config(format!("feature {name:?} lies outside the year window")));
                }
                return Ok(Feature::Yearly { metric, year });
            }
        }
        Err(Error::Config(format!("unknown ctd feature {name:?}")))
    }

    pub fn validate(&self) -> Result<()> {
        YearWindow::new(self.first_year, self.last_year)?;
        if self.features.is_empty() {
            return Err(Error::Config("empty ctd schema".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &self.features {
            if !seen.insert(name) {
                return Err(Error::Config(format!("duplicate ctd feature {name:?}")));
            }
            self.resolve(name)?;
        }
        Ok(())
    }
}

fn yearly_value(stats: &TrackYearStats, metric: usize) -> f64 {
    match metric {
        0 => stats.total_plays as f64,
        1 => stats.unique_listeners as f64,
        2 => stats.repeat_listeners as f64,
        _ => stats.median_plays_per_listener,
    }
}

/// Builds one feature row in schema order; years without stats are zero.
pub fn assemble_ctd_vector(song: &SongCtd, artist: &ArtistCtd, schema: &CtdSchema, mode: CtdMode) -> Result<Vec<f64>> {
    if schema.mode != mode {
        return Err(Error::Config(format!(
            "ctd schema built for {:?} used in {:?} mode",
            schema.mode, mode
        )));
    }
    let song_values = [
        song.total_plays as f64,
        song.unique_listeners as f64,
        song.repeat_listeners as f64,
        song.median_plays_per_listener,
        song.loyalty_rate,
        song.repeat_ratio,
    ];
    let artist_values = [
        artist.loyalty_rate,
        artist.loyalty_growth_rate,
        artist.reach_growth_rate,
        artist.loyalty_consistency,
        artist.engagement_consistency,
    ];
    schema
        .features
        .iter()
        .map(|name| {
            Ok(match schema.resolve(name)? {
                Feature::Song(i) => song_values[i],
                Feature::Artist(i) => artist_values[i],
                Feature::Yearly { metric, year } => song
                    .yearly
                    .iter()
                    .find(|s| s.year == year)
                    .map_or(0.0, |s| yearly_value(s, metric)),
            })
        })
        .collect()
}

/// Window-aligned yearly stats for every track in `counts`.
pub fn yearly_stats_by_track(counts: &EventCounts) -> BTreeMap<String, Vec<TrackYearStats>> {
    let window = counts.window;
    let mut out: BTreeMap<String, Vec<TrackYearStats>> = BTreeMap::new();
    for ((track, year), plays) in &counts.counts {
        let slot = out.entry(track.clone()).or_insert_with(|| {
            window.years().map(|y| TrackYearStats::empty(track, y)).collect()
        });
        slot[(*year - window.first) as usize] = compute_track_year_stats(track, *year, plays);
    }
    out
}

/// CTD features for every track with in-window engagement.
///
/// `artist_of` maps track ids to artist ids; a track without an entry is
/// treated as its own single-track artist. Artist features pool every
/// logged track of the artist, including tracks that are later dropped.
pub fn extract_ctd_features(
    counts: &EventCounts,
    artist_of: &BTreeMap<String, String>,
    schema: &CtdSchema,
) -> Result<FeatureTable> {
    schema.validate()?;
    if schema.window() != counts.window {
        return Err(Error::Config("ctd schema window differs from the event window".into()));
    }
    let yearly = yearly_stats_by_track(counts);
    let artist_key = |track: &str| artist_of.get(track).cloned().unwrap_or_else(|| track.to_string());

    let mut by_artist: BTreeMap<String, Vec<&[TrackYearStats]>> = BTreeMap::new();
    for (track, stats) in &yearly {
        by_artist.entry(artist_key(track)).or_default().push(stats);
    }
    let artists: BTreeMap<String, ArtistCtd> = by_artist
        .iter()
        .map(|(a, tracks)| (a.clone(), compute_artist_ctd(a, tracks, counts.window)))
        .collect();

    let mut ids = Vec::with_capacity(yearly.len());
    let mut data = Vec::with_capacity(yearly.len() * schema.len());
    for (track, stats) in &yearly {
        let song = compute_song_ctd(track, stats);
        let artist = &artists[&artist_key(track)];
        data.extend(assemble_ctd_vector(&song, artist, schema, schema.mode)?);
        ids.push(track.clone());
    }
    let values = Matrix::new(ids.len(), schema.len(), data)?;
    FeatureTable::new(ids, schema.features.clone(), values)
}

pub fn save_schema(schema: &CtdSchema, path: &Path) -> Result<()> {
    create_parent(path)?;
    let json = serde_json::to_string_pretty(schema)?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_schema(path: &Path) -> Result<CtdSchema> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema: CtdSchema = serde_json::from_str(&text)?;
    schema.validate()?;
    Ok(schema)
}

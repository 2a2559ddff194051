use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::lyrics::{normalize_lyrics, LyricsConfig};
use super::table::create_parent;
use crate::error::{Error, Result};

/// One row of track metadata.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub track_id: String,
    pub artist_id: String,
    pub release_year: i32,
    pub language: String,
    pub popularity: u8,
    #[serde(default)]
    pub lyrics: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    /// Inclusive lower bound on release year.
    pub min_year: i32,
    /// Language tags to keep, compared case-insensitively.
    pub languages: Vec<String>,
    /// Inclusive character-count bounds on normalized lyrics.
    pub lyric_length: Option<(usize, usize)>,
    pub lyrics: LyricsConfig,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        Self {
            min_year: 1960,
            languages: ["en", "instrumental", "pt", "es"].map(String::from).to_vec(),
            lyric_length: None,
            lyrics: LyricsConfig::default(),
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some((lo, hi)) = self.lyric_length {
            if lo == 0 || lo >= hi {
                return Err(Error::Config(format!("lyric length bounds must satisfy 0 < min < max, got ({lo}, {hi})")));
            }
        }
        if self.languages.is_empty() {
            return Err(Error::Config("language allowlist is empty".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Year,
    Language,
    LyricLength,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningTally {
    pub input: usize,
    pub kept: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
}

/// The first failed check, in the order year, language, lyric length.
/// Lyrics are normalized before their length is measured.
pub fn reject_reason(record: &TrackRecord, cfg: &CleaningConfig) -> Option<RejectReason> {
    if record.release_year < cfg.min_year {
        return Some(RejectReason::Year);
    }
    if !cfg.languages.iter().any(|l| l.eq_ignore_ascii_case(record.language.trim())) {
        return Some(RejectReason::Language);
    }
    if let Some((lo, hi)) = cfg.lyric_length {
        let n = normalize_lyrics(&record.lyrics, &cfg.lyrics).chars().count();
        if n < lo || n > hi {
            return Some(RejectReason::LyricLength);
        }
    }
    None
}

/// Filters records and normalizes the lyrics of those kept.
pub fn clean(records: &[TrackRecord], cfg: &CleaningConfig) -> Result<(Vec<TrackRecord>, CleaningTally)> {
    cfg.validate()?;
    let mut tally = CleaningTally {
        input: records.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for r in records {
        match reject_reason(r, cfg) {
            Some(reason) => *tally.rejected.entry(reason).or_insert(0) += 1,
            None => {
                let mut r = r.clone();
                r.lyrics = normalize_lyrics(&r.lyrics, &cfg.lyrics);
                kept.push(r);
            }
        }
    }
    tally.kept = kept.len();
    Ok((kept, tally))
}

pub fn read_records<R: Read>(source: R) -> Result<Vec<TrackRecord>> {
    let mut reader = csv::Reader::from_reader(source);
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<TrackRecord>().enumerate() {
        out.push(row.map_err(|e| Error::InvalidInput(format!("metadata row {}: {e}", i + 2)))?);
    }
    let mut ids: Vec<&str> = out.iter().map(|r| r.track_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidInput(format!("duplicate track_id {:?} in metadata", w[0])));
    }
    if let Some(r) = out.iter().find(|r| r.popularity > 100) {
        return Err(Error::InvalidInput(format!("popularity {} of {:?} is outside 0..=100", r.popularity, r.track_id)));
    }
    Ok(out)
}

pub fn write_records<W: Write>(records: &[TrackRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["track_id", "artist_id", "release_year", "language", "popularity", "lyrics"])?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("writing metadata: {e}")))?;
    Ok(())
}

pub fn load_records(path: &Path) -> Result<Vec<TrackRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_records(BufReader::new(file))
}

pub fn save_records(records: &[TrackRecord], path: &Path) -> Result<()> {
    create_parent(path)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_records(records, BufWriter::new(file))
}

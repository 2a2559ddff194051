use std::collections::BTreeMap;
use std::io::Read;

use chrono::{DateTime, Datelike, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One user–track interaction, timestamped in UTC seconds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListeningEvent {
    pub user_id: String,
    pub track_id: String,
    pub timestamp: i64,
}

impl ListeningEvent {
    pub fn year(&self) -> Option<i32> {
        utc_year(self.timestamp)
    }
}

pub fn utc_year(timestamp: i64) -> Option<i32> {
    DateTime::from_timestamp(timestamp, 0).map(|t| t.year())
}

/// Inclusive range of UTC calendar years.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearWindow {
    pub first: i32,
    pub last: i32,
}

impl Default for YearWindow {
    fn default() -> Self {
        Self {
            first: 2016,
            last: 2020,
        }
    }
}

impl YearWindow {
    pub fn new(first: i32, last: i32) -> Result<Self> {
        if last < first {
            return Err(Error::Config(format!("empty year window {first}..={last}")));
        }
        Ok(Self { first, last })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.first..=self.last).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.first..=self.last
    }

    pub fn len(&self) -> usize {
        (self.last - self.first + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Per (track, year) multiset of plays per user.
pub type UserPlays = BTreeMap<String, u32>;

/// Aggregated listening counts keyed by `(track_id, year)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventCounts {
    pub window: YearWindow,
    pub counts: BTreeMap<(String, i32), UserPlays>,
}

impl EventCounts {
    pub fn new(window: YearWindow) -> Self {
        Self {
            window,
            counts: BTreeMap::new(),
        }
    }

    pub fn record(&mut self, event: &ListeningEvent, year: i32) {
        *self
            .counts
            .entry((event.track_id.clone(), year))
            .or_default()
            .entry(event.user_id.clone())
            .or_insert(0) += 1;
    }

    pub fn get(&self, track_id: &str, year: i32) -> Option<&UserPlays> {
        self.counts.get(&(track_id.to_string(), year))
    }

    /// Distinct tracks with at least one in-window event, sorted.
    pub fn track_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.counts.keys().map(|(t, _)| t.clone()).collect();
        ids.dedup();
        ids
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Adds the counts of a disjoint or overlapping shard.
    pub fn merge(&mut self, other: EventCounts) {
        for (key, users) in other.counts {
            let slot = self.counts.entry(key).or_default();
            for (user, n) in users {
                *slot.entry(user).or_insert(0) += n;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: u64,
    pub accepted: u64,
    pub malformed: u64,
    pub out_of_window: u64,
}

/// Aggregates in-memory events; out-of-window events are counted and dropped.
pub fn aggregate_events<'a>(
    events: impl IntoIterator<Item = &'a ListeningEvent>,
    window: YearWindow,
) -> (EventCounts, IngestReport) {
    let mut counts = EventCounts::new(window);
    let mut report = IngestReport::default();
    for ev in events {
        report.rows += 1;
        match ev.year() {
            Some(y) if window.contains(y) => {
                counts.record(ev, y);
                report.accepted += 1;
            }
            Some(_) => report.out_of_window += 1,
            None => report.malformed += 1,
        }
    }
    (counts, report)
}

/// Parses epoch seconds, RFC 3339, or a naive `YYYY-MM-DD[ T]HH:MM:SS`
/// (taken as UTC) or bare date.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    if let Ok(secs) = s.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|t| t.and_utc().timestamp())
}

/// Reads a delimited event log with a `user_id, track_id, timestamp`
/// header (columns in any order, comma or tab separated).
///
/// Rows that fail to parse are counted as malformed and skipped; a
/// missing header column or unreadable source is an error.
pub fn ingest_events<R: Read>(mut source: R, window: YearWindow) -> Result<(EventCounts, IngestReport)> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::InvalidInput(format!("unreadable event source: {e}")))?;
    let first_line = text.lines().next().unwrap_or_default();
    let delimiter = if first_line.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::InvalidInput(format!("event log header lacks {name:?}")))
    };
    let (ui, ti, si) = (col("user_id")?, col("track_id")?, col("timestamp")?);

    let mut counts = EventCounts::new(window);
    let mut report = IngestReport::default();
    for record in reader.records() {
        report.rows += 1;
        let parsed = record.ok().and_then(|r| {
            let user = r.get(ui)?.trim();
            let track = r.get(ti)?.trim();
            let ts = parse_timestamp(r.get(si)?)?;
            (!user.is_empty() && !track.is_empty()).then(|| ListeningEvent {
                user_id: user.to_string(),
                track_id: track.to_string(),
                timestamp: ts,
            })
        });
        let Some(ev) = parsed else {
            report.malformed += 1;
            continue;
        };
        match ev.year() {
            Some(y) if window.contains(y) => {
                counts.record(&ev, y);
                report.accepted += 1;
            }
            Some(_) => report.out_of_window += 1,
            None => report.malformed += 1,
        }
    }
    Ok((counts, report))
}

/// Writes events as a comma-separated log with epoch-second timestamps.
pub fn write_events<W: std::io::Write>(events: &[ListeningEvent], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["user_id", "track_id", "timestamp"])?;
    for ev in events {
        w.write_record([ev.user_id.as_str(), ev.track_id.as_str(), &ev.timestamp.to_string()])?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("writing events: {e}")))?;
    Ok(())
}

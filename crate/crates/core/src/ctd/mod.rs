//! Listening-event ingestion and trajectory features.

mod events;
mod schema;
mod stats;

pub use events::{
    aggregate_events, ingest_events, parse_timestamp, utc_year, write_events, EventCounts,
    IngestReport, ListeningEvent, UserPlays, YearWindow,
};
pub use schema::{
    assemble_ctd_vector, extract_ctd_features, load_schema, save_schema, yearly_stats_by_track,
    CtdMode, CtdSchema, ARTIST_FEATURES, SONG_FEATURES, YEARLY_METRICS,
};
pub use stats::{
    compute_artist_ctd, compute_song_ctd, compute_track_year_stats, median, ols_slope,
    pool_artist_years, population_stdev, ArtistCtd, ArtistYearSeries, SongCtd, TrackYearStats,
};

use serde::{Deserialize, Serialize};

use super::{UserPlays, YearWindow};

/// Engagement of one track in one calendar year.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackYearStats {
    pub track_id: String,
    pub year: i32,
    pub total_plays: u64,
    pub unique_listeners: u64,
    /// Listeners with at least two plays that year.
    pub repeat_listeners: u64,
    /// Median of the per-listener play counts.
    pub median_plays_per_listener: f64,
}

impl TrackYearStats {
    pub fn empty(track_id: &str, year: i32) -> Self {
        Self {
            track_id: track_id.to_string(),
            year,
            total_plays: 0,
            unique_listeners: 0,
            repeat_listeners: 0,
            median_plays_per_listener: 0.0,
        }
    }
}

/// Median with the midpoint of the two middle values for even counts;
/// 0 for an empty slice.
pub fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn compute_track_year_stats(track_id: &str, year: i32, plays: &UserPlays) -> TrackYearStats {
    let mut counts: Vec<f64> = plays.values().map(|&n| f64::from(n)).collect();
    TrackYearStats {
        track_id: track_id.to_string(),
        year,
        total_plays: plays.values().map(|&n| u64::from(n)).sum(),
        unique_listeners: plays.len() as u64,
        repeat_listeners: plays.values().filter(|&&n| n >= 2).count() as u64,
        median_plays_per_listener: median(&mut counts),
    }
}

/// Song-level trajectory summary over the window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SongCtd {
    pub track_id: String,
    /// One entry per window year, zero-filled.
    pub yearly: Vec<TrackYearStats>,
    pub total_plays: u64,
    pub unique_listeners: u64,
    pub repeat_listeners: u64,
    /// Median of the yearly medians over years that had listeners.
    pub median_plays_per_listener: f64,
    pub loyalty_rate: f64,
    pub repeat_ratio: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn compute_song_ctd(track_id: &str, yearly: &[TrackYearStats]) -> SongCtd {
    let total: u64 = yearly.iter().map(|s| s.total_plays).sum();
    let unique: u64 = yearly.iter().map(|s| s.unique_listeners).sum();
    let repeat: u64 = yearly.iter().map(|s| s.repeat_listeners).sum();
    let mut medians: Vec<f64> = yearly
        .iter()
        .filter(|s| s.unique_listeners > 0)
        .map(|s| s.median_plays_per_listener)
        .collect();
    SongCtd {
        track_id: track_id.to_string(),
        yearly: yearly.to_vec(),
        total_plays: total,
        unique_listeners: unique,
        repeat_listeners: repeat,
        median_plays_per_listener: median(&mut medians),
        loyalty_rate: ratio(repeat as f64, unique as f64),
        repeat_ratio: ratio(total as f64 - unique as f64, total as f64),
    }
}

/// Artist-level career trajectory features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtistCtd {
    pub artist_id: String,
    pub loyalty_rate: f64,
    pub loyalty_growth_rate: f64,
    pub reach_growth_rate: f64,
    pub loyalty_consistency: f64,
    pub engagement_consistency: f64,
}

impl ArtistCtd {
    pub fn empty(artist_id: &str) -> Self {
        Self {
            artist_id: artist_id.to_string(),
            loyalty_rate: 0.0,
            loyalty_growth_rate: 0.0,
            reach_growth_rate: 0.0,
            loyalty_consistency: 1.0,
            engagement_consistency: 1.0,
        }
    }
}

/// Least-squares slope of `ys` against `0, 1, 2, ...`.
pub fn ols_slope(ys: &[f64]) -> f64 {
    let n = ys.len();
    if n < 2 {
        return 0.0;
    }
    let x_mean = (n - 1) as f64 / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// Population standard deviation.
pub fn population_stdev(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Pooled per-year series of one artist.
#[derive(Clone, Debug, PartialEq)]
pub struct ArtistYearSeries {
    /// Pooled repeat listeners / pooled unique listeners.
    pub loyalty: Vec<f64>,
    /// Pooled unique listeners.
    pub reach: Vec<f64>,
    /// Median of per-track median plays among tracks with listeners.
    pub engagement: Vec<f64>,
    pub has_listeners: Vec<bool>,
}

/// Pools the window-aligned yearly stats of every track by one artist.
pub fn pool_artist_years(tracks: &[&[TrackYearStats]], window: YearWindow) -> ArtistYearSeries {
    let mut series = ArtistYearSeries {
        loyalty: Vec::with_capacity(window.len()),
        reach: Vec::with_capacity(window.len()),
        engagement: Vec::with_capacity(window.len()),
        has_listeners: Vec::with_capacity(window.len()),
    };
    for year in window.years() {
        let (mut unique, mut repeat) = (0u64, 0u64);
        let mut medians = Vec::new();
        for stats in tracks {
            if let Some(s) = stats.iter().find(|s| s.year == year) {
                unique += s.unique_listeners;
                repeat += s.repeat_listeners;
                if s.unique_listeners > 0 {
                    medians.push(s.median_plays_per_listener);
                }
            }
        }
        series.loyalty.push(ratio(repeat as f64, unique as f64));
        series.reach.push(unique as f64);
        series.engagement.push(median(&mut medians));
        series.has_listeners.push(unique > 0);
    }
    series
}

pub fn compute_artist_ctd(artist_id: &str, tracks: &[&[TrackYearStats]], window: YearWindow) -> ArtistCtd {
    let s = pool_artist_years(tracks, window);
    let active: Vec<f64> = s
        .loyalty
        .iter()
        .zip(&s.has_listeners)
        .filter(|(_, &a)| a)
        .map(|(&l, _)| l)
        .collect();
    let log_reach: Vec<f64> = s.reach.iter().map(|r| r.ln_1p()).collect();
    ArtistCtd {
        artist_id: artist_id.to_string(),
        loyalty_rate: if active.is_empty() {
            0.0
        } else {
            active.iter().sum::<f64>() / active.len() as f64
        },
        loyalty_growth_rate: ols_slope(&s.loyalty),
        reach_growth_rate: ols_slope(&log_reach),
        loyalty_consistency: 1.0 / (1.0 + population_stdev(&s.loyalty)),
        engagement_consistency: 1.0 / (1.0 + population_stdev(&s.engagement)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plays(pairs: &[(&str, u32)]) -> UserPlays {
        pairs.iter().map(|(u, n)| (u.to_string(), *n)).collect()
    }

    fn year_stats(year: i32, total: u64, unique: u64, repeat: u64, median: f64) -> TrackYearStats {
        TrackYearStats {
            track_id: "t".into(),
            year,
            total_plays: total,
            unique_listeners: unique,
            repeat_listeners: repeat,
            median_plays_per_listener: median,
        }
    }

    #[test]
    fn track_year_examples() {
        let s = compute_track_year_stats("t", 2017, &plays(&[("u", 1)]));
        assert_eq!((s.total_plays, s.unique_listeners, s.repeat_listeners), (1, 1, 0));
        assert_eq!(s.median_plays_per_listener, 1.0);

        let s = compute_track_year_stats("t", 2017, &plays(&[("u1", 3), ("u2", 1)]));
        assert_eq!((s.total_plays, s.unique_listeners, s.repeat_listeners), (4, 2, 1));
        assert_eq!(s.median_plays_per_listener, 2.0);
    }

    #[test]
    fn median_convention() {
        assert_eq!(median(&mut [5.0, 1.0, 3.0]), 3.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&mut []), 0.0);
    }

    #[test]
    fn song_examples() {
        let zeros: Vec<_> = (2016..=2020).map(|y| TrackYearStats::empty("t", y)).collect();
        let s = compute_song_ctd("t", &zeros);
        assert_eq!((s.total_plays, s.unique_listeners, s.repeat_listeners), (0, 0, 0));
        assert_eq!((s.loyalty_rate, s.repeat_ratio, s.median_plays_per_listener), (0.0, 0.0, 0.0));

        let one = [year_stats(2016, 4, 2, 1, 1.0)];
        let s = compute_song_ctd("t", &one);
        assert_eq!(s.loyalty_rate, 0.5);
        assert_eq!(s.repeat_ratio, 0.5);

        let two = [year_stats(2016, 4, 2, 1, 1.0), year_stats(2017, 4, 2, 1, 1.0)];
        let s2 = compute_song_ctd("t", &two);
        assert_eq!(s2.loyalty_rate, s.loyalty_rate);
        assert_eq!(s2.repeat_ratio, s.repeat_ratio);
    }

    #[test]
    fn artist_flat_and_linear_series() {
        let w = YearWindow::default();
        // Constant loyalty 0.5 every year.
        let flat: Vec<_> = w.years().map(|y| year_stats(y, 6, 4, 2, 1.0)).collect();
        let a = compute_artist_ctd("a", &[&flat], w);
        assert_eq!(a.loyalty_growth_rate, 0.0);
        assert_eq!(a.loyalty_consistency, 1.0);
        assert_eq!(a.loyalty_rate, 0.5);
        assert_eq!(a.reach_growth_rate, 0.0);

        // Loyalty 0.2, 0.3, ..., 0.6 with 10 listeners per year.
        let rising: Vec<_> = w
            .years()
            .enumerate()
            .map(|(i, y)| year_stats(y, 20, 10, 2 + i as u64, 1.0))
            .collect();
        let a = compute_artist_ctd("a", &[&rising], w);
        assert!((a.loyalty_growth_rate - 0.1).abs() < 1e-15);
    }

    #[test]
    fn artist_all_zero() {
        let w = YearWindow::default();
        let zeros: Vec<_> = w.years().map(|y| TrackYearStats::empty("t", y)).collect();
        assert_eq!(compute_artist_ctd("a", &[&zeros], w), ArtistCtd::empty("a"));
    }

    #[test]
    fn ols_matches_closed_form() {
        assert!((ols_slope(&[0.2, 0.3, 0.4, 0.5, 0.6]) - 0.1).abs() < 1e-15);
        assert_eq!(ols_slope(&[3.0]), 0.0);
        assert_eq!(population_stdev(&[2.0, 4.0]), 1.0);
    }
}

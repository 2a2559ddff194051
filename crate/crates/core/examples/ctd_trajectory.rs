//! Trajectory features for a handful of tracks from an in-memory log.

use std::collections::BTreeMap;

use gamenet::ctd::{aggregate_events, extract_ctd_features, CtdMode, CtdSchema, ListeningEvent, YearWindow};

fn at(year: i32) -> i64 {
    (i64::from(year) - 1970) * 365 * 86_400 + 200 * 86_400
}

fn main() -> gamenet::Result<()> {
    let window = YearWindow::new(2016, 2020)?;
    let mut events = Vec::new();
    let mut push = |user: &str, track: &str, year: i32, times: usize| {
        for _ in 0..times {
            events.push(ListeningEvent { user_id: user.into(), track_id: track.into(), timestamp: at(year) });
        }
    };
    // A slow burner that keeps its listeners.
    for (i, year) in (2016..=2020).enumerate() {
        for u in 0..=i {
            push(&format!("u{u}"), "steady", year, 2);
        }
    }
    // A one-year hit.
    for u in 0..8 {
        push(&format!("u{u}"), "flash", 2017, 1);
    }
    push("u1", "flash", 2018, 1);
    push("u9", "old", 2012, 5);

    let (counts, report) = aggregate_events(&events, window);
    println!("{} events, {} in window, {} outside", report.rows, report.accepted, report.out_of_window);

    let artists = BTreeMap::from([("steady".to_string(), "a1".to_string()), ("flash".to_string(), "a2".to_string())]);
    let schema = CtdSchema::default_for(CtdMode::Aggregate, window);
    let table = extract_ctd_features(&counts, &artists, &schema)?;
    for (r, id) in table.ids.iter().enumerate() {
        println!("\n{id}");
        for (c, name) in table.names.iter().enumerate() {
            println!("  {name:<32} {:>8.4}", table.values.get(r, c));
        }
    }
    Ok(())
}

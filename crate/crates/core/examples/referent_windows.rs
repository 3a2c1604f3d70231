//! Expands dated events into time-stratified referent windows: each case
//! day is compared with the other same-weekday days of its month.
//!
//!     cargo run --example referent_windows

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use clbart::strata::{build_time_stratified_windows, time_stratified_window, CaseEvent, ColumnNames, Observation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = NaiveDate::from_ymd_opt(2005, 1, 1).unwrap();
    // A toy daily series: temperature-like exposure plus one confounder.
    let series: BTreeMap<NaiveDate, Observation> = (0..365)
        .map(|d| {
            let t = d as f64;
            let obs = Observation {
                z: (t / 365.0 * std::f64::consts::TAU).sin(),
                x: vec![(t / 7.0).cos()],
            };
            (start + Duration::days(d), obs)
        })
        .collect();
    let events: Vec<CaseEvent> = [("alice", 191, 1.0), ("bob", 58, 0.0), ("carol", 300, 1.0)]
        .into_iter()
        .map(|(id, day, w)| CaseEvent {
            id: id.into(),
            date: start + Duration::days(day),
            moderators: vec![w],
            series: series.clone(),
        })
        .collect();
    for ev in &events {
        let window = time_stratified_window(ev.date);
        let dates: Vec<String> = window.iter().map(|d| d.to_string()).collect();
        println!("{:<6} case {}  window {}", ev.id, ev.date, dates.join(" "));
    }
    let names = ColumnNames {
        confounders: vec!["x_1".into()],
        moderators: vec!["w_1".into()],
    };
    let data = build_time_stratified_windows(&events, &names)?;
    println!();
    for s in &data.strata {
        let z: Vec<String> = s.exposure().iter().map(|v| format!("{v:+.3}")).collect();
        println!("{:<6} rows {}  case row {}  z [{}]", s.id(), s.n_rows(), s.case_index(), z.join(", "));
    }
    Ok(())
}

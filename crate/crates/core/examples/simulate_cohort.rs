//! Generates one benchmark cohort and reports its case counts.
//!
//!     cargo run --release --example simulate_cohort -- [cart|friedman] [seed]

use clbart::simbench::{simulate_cohort, Scenario, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let scenario: Scenario = args.next().as_deref().unwrap_or("cart").parse()?;
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);
    let spec = ScenarioSpec {
        scenario,
        seed,
        ..ScenarioSpec::default()
    };
    let cohort = simulate_cohort(&spec)?;
    let d = &cohort.dataset;
    println!("scenario            {scenario}");
    println!("events generated    {}", cohort.n_events);
    println!("cases (strata)      {}", d.len());
    println!("repeat-in-month     {}", cohort.n_repeat_discarded);
    println!("window past horizon {}", cohort.n_edge_discarded);
    let mut sizes = [0usize; 6];
    for s in &d.strata {
        sizes[s.n_rows()] += 1;
    }
    println!("strata with 4 rows  {}", sizes[4]);
    println!("strata with 5 rows  {}", sizes[5]);
    let mean_tau = cohort.tau.iter().sum::<f64>() / cohort.tau.len() as f64;
    println!("mean true tau       {mean_tau:.4}");
    println!("surface             {:?}", cohort.surface);
    Ok(())
}

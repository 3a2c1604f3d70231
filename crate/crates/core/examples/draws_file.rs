//! Writes a fit's draws to disk, reads them back and rebuilds the summary
//! report from the file alone.
//!
//!     cargo run --release --example draws_file -- [path]

use clbart::draws::{read_draws, write_draws, DrawsHeader};
use clbart::report::{build_report, SummaryConfig};
use clbart::sampler::{run_chain, SamplerConfig};
use clbart::simbench::{simulate_cohort, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "draws.jsonl".into());
    let cohort = simulate_cohort(&ScenarioSpec {
        n_individuals: 1500,
        ..ScenarioSpec::default()
    })?;
    let cfg = SamplerConfig {
        n_trees: 3,
        iterations: 400,
        burn_in: 200,
        thin: 2,
        ..SamplerConfig::default()
    };
    let post = run_chain(&cohort.dataset, &cfg)?;
    let header = DrawsHeader::new(&cohort.dataset, &post);
    write_draws(path.as_ref(), &header, &post.draws)?;
    let (header2, draws2) = read_draws(path.as_ref())?;
    assert_eq!(draws2, post.draws, "draws round-trip exactly");
    let report = build_report(&header2, &draws2, &SummaryConfig::default())?;
    println!("wrote and re-read {} draws from {path}\n", draws2.len());
    print!("{}", report.to_text());
    Ok(())
}

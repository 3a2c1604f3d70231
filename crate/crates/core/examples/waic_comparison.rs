//! Model comparison by WAIC across ensemble sizes on one cohort.
//!
//!     cargo run --release --example waic_comparison -- [iterations] [individuals]

use clbart::sampler::{compute_waic, run_chain, SamplerConfig};
use clbart::simbench::{simulate_cohort, Scenario, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let individuals: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(3000);
    let cohort = simulate_cohort(&ScenarioSpec {
        scenario: Scenario::Friedman,
        n_individuals: individuals,
        ..ScenarioSpec::default()
    })?;
    println!("{} strata", cohort.dataset.len());
    println!("{:>5} {:>12} {:>9} {:>12}", "trees", "WAIC", "p_waic", "lppd");
    for m in [1, 5, 10] {
        let cfg = SamplerConfig {
            n_trees: m,
            iterations,
            burn_in: iterations / 2,
            ..SamplerConfig::default()
        };
        let post = run_chain(&cohort.dataset, &cfg)?;
        let w = compute_waic(&post.loglik_matrix());
        println!("{m:>5} {:>12.3} {:>9.3} {:>12.3}", w.waic, w.p_waic, w.lppd);
    }
    Ok(())
}

//! One benchmark replicate: simulate a cohort, fit the oracle and CL-BART
//! for each tree count, print the metric records.
//!
//!     cargo run --release --example benchmark_replicate -- cart 5,10 2000 [seed]

use std::time::Instant;

use clbart::sampler::SamplerConfig;
use clbart::simbench::{run_replicate, Scenario, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let scenario: Scenario = args.first().map_or("cart", String::as_str).parse()?;
    let trees: Vec<usize> = args
        .get(1)
        .map_or("5", String::as_str)
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_, _>>()?;
    let iterations: usize = args.get(2).map_or(Ok(10_000), |s| s.parse())?;
    let seed: u64 = args.get(3).map_or(Ok(1), |s| s.parse())?;
    let spec = ScenarioSpec {
        scenario,
        seed,
        ..ScenarioSpec::default()
    };
    let sampler = SamplerConfig {
        iterations,
        burn_in: iterations / 2,
        ..SamplerConfig::default()
    };
    let start = Instant::now();
    for r in run_replicate(&spec, &sampler, &trees, 0)? {
        let m = r.metrics;
        println!(
            "{:?} M={:<4} bias {:+.4}  rmse {:.4}  coverage {:.3}  width {:.3}  beta-accept {:?}",
            r.estimator,
            r.trees.map_or("-".into(), |t| t.to_string()),
            m.bias,
            m.rmse,
            m.coverage,
            m.width,
            r.beta_acceptance.map(|a| (a * 1000.0).round() / 1000.0),
        );
        if let (Some(vi), Some(truth)) = (&r.variable_importance, &r.true_moderators) {
            let fmt: Vec<String> = vi.iter().map(|v| format!("{v:.2}")).collect();
            println!("    split proportions [{}], true moderators {truth:?}", fmt.join(" "));
        }
    }
    eprintln!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}

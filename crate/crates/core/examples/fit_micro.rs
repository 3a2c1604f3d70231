//! The smallest non-trivial model: one tree over a single binary moderator.
//! Only two tree shapes exist, so the sampler's visit frequencies can be
//! read off directly.
//!
//!     cargo run --release --example fit_micro -- [iterations]

use clbart::sampler::{run_chain, SamplerConfig};
use clbart::strata::{Dataset, ModeratorKind, Stratum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let iterations = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    // 60 strata of 4 days; the exposure odds ratio is e^0 for w = 0 and e^1 for w = 1.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let strata = (0..60)
        .map(|i| {
            let w = (i % 2) as f64;
            let z: Vec<f64> = (0..4).map(|t| if t == 0 { 1.0 } else { f64::from(rng.random_bool(0.3)) }).collect();
            let weights: Vec<f64> = z.iter().map(|zt| (w * zt).exp()).collect();
            let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
            let case = weights.iter().position(|wt| {
                u -= wt;
                u < 0.0
            });
            let rows = z.into_iter().map(|zt| (zt, vec![])).collect();
            Stratum::new(format!("s{i}"), case.unwrap_or(3), rows, vec![w])
        })
        .collect::<Result<Vec<_>, _>>()?;
    let data = Dataset::new(strata, vec!["w_1".into()], vec![ModeratorKind::Binary], vec![])?;
    let cfg = SamplerConfig {
        n_trees: 1,
        iterations,
        burn_in: iterations / 10,
        thin: 1,
        ..SamplerConfig::default()
    };
    let post = run_chain(&data, &cfg)?;
    let split: Vec<_> = post.draws.iter().filter(|d| d.node_counts[0] == 3).collect();
    println!("kept draws {}, P(split on w_1) = {:.3}", post.draws.len(), split.len() as f64 / post.draws.len() as f64);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let tau0: Vec<f64> = post.draws.iter().map(|d| d.tau[0]).collect();
    let tau1: Vec<f64> = post.draws.iter().map(|d| d.tau[1]).collect();
    println!("posterior mean log OR: w = 0 {:.3}, w = 1 {:.3}", mean(&tau0), mean(&tau1));
    println!(
        "acceptance: grow {}/{}, prune {}/{}, change {}/{}",
        post.stats.grow.accepted,
        post.stats.grow.proposed,
        post.stats.prune.accepted,
        post.stats.prune.proposed,
        post.stats.change.accepted,
        post.stats.change.proposed
    );
    Ok(())
}

//! A leaf's full conditional: Laplace approximation (used to propose tree
//! moves) against exact adaptive-rejection draws.
//!
//!     cargo run --release --example leaf_sampling

use clbart::clr::LinearPredictorParts;
use clbart::moves::{laplace_fit, NodeTarget};
use clbart::strata::Stratum;
use clbart::updates::ars_sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Three small strata: the case was exposed in the first two.
    let strata = [
        Stratum::new("a", 0, vec![(1.0, vec![]), (0.0, vec![]), (0.0, vec![]), (0.0, vec![])], vec![])?,
        Stratum::new("b", 1, vec![(0.0, vec![]), (1.0, vec![]), (1.0, vec![]), (0.0, vec![])], vec![])?,
        Stratum::new("c", 2, vec![(1.0, vec![]), (0.0, vec![]), (0.0, vec![]), (1.0, vec![])], vec![])?,
    ];
    let parts: Vec<LinearPredictorParts> = strata.iter().map(|s| LinearPredictorParts::new(s, &[])).collect();
    let offsets = [0.0; 3];
    let members = [0, 1, 2];
    let sigma_mu = 0.5;
    let target = NodeTarget::new(&parts, &offsets, &members, sigma_mu);
    let fit = laplace_fit(&target, 0.0).ok_or("no Laplace fit")?;
    println!("Laplace approximation: mean {:.4}, sd {:.4}", fit.mean, fit.sd);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 20_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| ars_sample(&target, &[fit.mean - fit.sd, fit.mean, fit.mean + fit.sd], &mut rng))
        .collect::<Result<_, _>>()?;
    let mean = draws.iter().sum::<f64>() / n as f64;
    let sd = (draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    println!("exact draws (ARS):     mean {mean:.4}, sd {sd:.4}  ({n} draws)");
    Ok(())
}

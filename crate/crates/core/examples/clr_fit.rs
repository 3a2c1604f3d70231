//! Frequentist conditional logistic regression with a single homogeneous
//! exposure effect, on a simulated cohort.
//!
//!     cargo run --release --example clr_fit -- [seed]

use clbart::clr::clr_fit;
use clbart::simbench::{simulate_cohort, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let cohort = simulate_cohort(&ScenarioSpec {
        seed,
        ..ScenarioSpec::default()
    })?;
    let d = &cohort.dataset;
    let fit = clr_fit(d, true)?;
    println!("{} strata, converged in {} iterations, loglik {:.3}", d.len(), fit.iterations, fit.loglik);
    let mut names = d.confounder_names.clone();
    names.push("z (homogeneous)".into());
    let truth: Vec<f64> = cohort
        .beta
        .iter()
        .copied()
        .chain([cohort.tau.iter().sum::<f64>() / cohort.tau.len() as f64])
        .collect();
    println!("{:<18} {:>9} {:>9} {:>9}", "", "estimate", "s.e.", "truth");
    for (j, name) in names.iter().enumerate() {
        println!("{name:<18} {:>9.4} {:>9.4} {:>9.4}", fit.beta_hat[j], fit.std_error(j), truth[j]);
    }
    Ok(())
}

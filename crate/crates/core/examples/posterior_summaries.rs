//! Fits CL-BART to a simulated CART-scenario cohort and prints the
//! posterior summaries: average effect, variable importance, marginal
//! contributions, partial dependence and the CART summary tree.
//!
//!     cargo run --release --example posterior_summaries -- [iterations] [individuals]

use clbart::posterior::{
    average_effect, cart_summary, default_min_leaf, individual_effects, marginal_contribution, partial_dependence,
    variable_importance, Scale,
};
use clbart::sampler::{run_chain, SamplerConfig};
use clbart::simbench::{simulate_cohort, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(2000);
    let individuals: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4000);
    let cohort = simulate_cohort(&ScenarioSpec {
        n_individuals: individuals,
        ..ScenarioSpec::default()
    })?;
    let data = &cohort.dataset;
    println!("{} strata; true surface {:?}", data.len(), cohort.surface);
    let cfg = SamplerConfig {
        n_trees: 5,
        iterations,
        burn_in: iterations / 2,
        ..SamplerConfig::default()
    };
    let post = run_chain(data, &cfg)?;
    let draws = &post.draws;
    let w = data.moderator_matrix();

    let avg = average_effect(draws, Scale::OddsRatio, 0.95)?;
    println!("\naverage odds ratio {:.3} [{:.3}, {:.3}]", avg.mean, avg.lower, avg.upper);

    let vi = variable_importance(draws, 0.95)?;
    println!("\nsplit proportions and marginal ratios of odds ratios (w = 1 vs 0)");
    for (j, name) in data.moderator_names.iter().enumerate() {
        let mc = marginal_contribution(draws, &w, &data.moderator_kinds, j, Scale::OddsRatio, 0.95)?;
        println!("  {name:<5} {:.3}   {:.3} [{:.3}, {:.3}]", vi.mean[j], mc.mean, mc.lower, mc.upper);
    }

    if let clbart::simbench::EffectSurface::Cart { vars } = cohort.surface {
        println!("\npartial dependence on the first true moderator (odds-ratio scale)");
        for v in [0.0, 1.0] {
            let pd = partial_dependence(draws, &w, &[(vars[0], v)], Scale::OddsRatio, 0.95)?;
            println!("  w_{} = {v}: {:.3} [{:.3}, {:.3}]", vars[0] + 1, pd.mean, pd.lower, pd.upper);
        }
    }

    let tau_hat: Vec<f64> = individual_effects(draws, Scale::Log, 0.95)?.iter().map(|e| e.mean).collect();
    let all: Vec<usize> = (0..data.n_moderators()).collect();
    let cart = cart_summary(&tau_hat, &w, &all, 2, default_min_leaf(data.len()));
    println!("\nCART summary of posterior means (summary R2 {:.3})", cart.summary_r2);
    for leaf in &cart.leaves {
        let rule: Vec<String> = leaf
            .conditions
            .iter()
            .map(|c| format!("w_{} {} {}", c.var + 1, if c.above { ">" } else { "<=" }, c.cut))
            .collect();
        println!("  {:<28} n {:>5}  OR {:.3}", rule.join(" & "), leaf.n, leaf.mean.exp());
    }
    Ok(())
}

//! The MCMC driver: one iteration updates β, then each tree in turn against
//! the others' offsets (structure move, then leaf refresh), then the split
//! probabilities, their concentration and the leaf scale.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clr::{clr_fit, ClrError, LinearPredictorParts};
use crate::forest::{forest_predict, Tree, TreePrior};
use crate::moves::{propose_move, MoveContext, MoveKind, MoveProbabilities};
use crate::numeric::log_sum_exp;
use crate::strata::Dataset;
use crate::updates::{
    cholesky_lower, refresh_leaves, update_beta, update_concentration,
    update_sigma_mu, update_split_probs, AdaptiveScale, ArsError, BetaPrior,
};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("initial conditional logistic fit failed: {0}")]
    Clr(#[from] ClrError),
    #[error("leaf update failed: {0}")]
    Ars(#[from] ArsError),
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("dataset has no strata")]
    EmptyDataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    /// Number of trees M.
    pub n_trees: usize,
    /// Leaf-scale hyperparameter: σ_μ ~ C⁺(0, k/√M).
    pub k: f64,
    pub gamma: f64,
    pub xi: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub move_probs: MoveProbabilities,
    /// Normal prior sd on each β component; flat when absent.
    pub beta_prior: Option<BetaPrior>,
    /// Hold σ_μ fixed at this value instead of updating it.
    pub fixed_sigma_mu: Option<f64>,
    /// Hold the split probabilities and concentration at their initial values.
    pub fixed_split_probs: bool,
    pub sigma_mu_step: f64,
    pub adapt_window: usize,
    /// Exact recomputation of the ensemble predictions every this many iterations.
    pub refresh_every: usize,
    /// Check incremental predictions against recomputation every 100 iterations.
    pub debug_checks: bool,
    /// Store the serialized forest with each kept draw.
    pub keep_forests: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_trees: 25,
            k: 1.0,
            gamma: 0.95,
            xi: 2.0,
            iterations: 10_000,
            burn_in: 5_000,
            thin: 5,
            seed: 1,
            move_probs: MoveProbabilities::default(),
            beta_prior: None,
            fixed_sigma_mu: None,
            fixed_split_probs: false,
            sigma_mu_step: 0.5,
            adapt_window: 100,
            refresh_every: 500,
            debug_checks: false,
            keep_forests: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let fail = |m: &str| Err(SamplerError::Config(m.to_string()));
        if self.n_trees == 0 {
            return fail("n_trees must be at least 1");
        }
        if self.burn_in >= self.iterations {
            return fail("burn_in must be smaller than iterations");
        }
        if self.thin == 0 {
            return fail("thin must be at least 1");
        }
        if !(self.k > 0.0) {
            return fail("k must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return fail("gamma must lie in (0, 1)");
        }
        if !(self.xi >= 0.0) {
            return fail("xi must be non-negative");
        }
        let p = self.move_probs;
        if p.grow < 0.0 || p.prune < 0.0 || p.change < 0.0 || p.grow + p.prune + p.change <= 0.0 {
            return fail("move probabilities must be non-negative with a positive sum");
        }
        if self.fixed_sigma_mu.is_some_and(|s| !(s > 0.0)) {
            return fail("fixed_sigma_mu must be positive");
        }
        if self.beta_prior.is_some_and(|b| !(b.sd > 0.0)) {
            return fail("beta_prior.sd must be positive");
        }
        if !(self.sigma_mu_step > 0.0) || self.adapt_window == 0 || self.refresh_every == 0 {
            return fail("sigma_mu_step, adapt_window and refresh_every must be positive");
        }
        Ok(())
    }

    pub fn kept_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub iteration: usize,
    pub beta: Vec<f64>,
    /// Ensemble prediction τ(w_i) per stratum.
    pub tau: Vec<f64>,
    pub sigma_mu: f64,
    pub concentration: f64,
    pub split_probs: Vec<f64>,
    pub node_counts: Vec<usize>,
    pub split_counts: Vec<usize>,
    pub loglik: Vec<f64>,
    pub total_loglik: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forest: Vec<Tree>,
}

impl Draw {
    pub fn mean_tau(&self) -> f64 {
        self.tau.iter().sum::<f64>() / self.tau.len() as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MoveStats {
    pub proposed: usize,
    pub accepted: usize,
}

/// Acceptance counts after burn-in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub grow: MoveStats,
    pub prune: MoveStats,
    pub change: MoveStats,
    pub beta: MoveStats,
    pub sigma_mu: MoveStats,
    pub final_beta_scale: f64,
    pub final_sigma_mu_step: f64,
}

impl ChainStats {
    fn record(&mut self, kind: MoveKind, accepted: bool) {
        let s = match kind {
            MoveKind::Grow => &mut self.grow,
            MoveKind::Prune => &mut self.prune,
            MoveKind::Change => &mut self.change,
        };
        s.proposed += 1;
        s.accepted += usize::from(accepted);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub config: SamplerConfig,
    pub draws: Vec<Draw>,
    pub stats: ChainStats,
}

impl PosteriorDraws {
    pub fn loglik_matrix(&self) -> Vec<Vec<f64>> {
        self.draws.iter().map(|d| d.loglik.clone()).collect()
    }
}

/// A running chain. [`run_chain`] drives it; exposed for step-level checks.
pub struct Chain<'a> {
    data: &'a Dataset,
    moderators: Vec<Vec<f64>>,
    config: SamplerConfig,
    rng: ChaCha8Rng,
    beta: Vec<f64>,
    beta_ll: f64,
    beta_chol: Vec<Vec<f64>>,
    beta_scale: AdaptiveScale,
    sigma_scale: AdaptiveScale,
    parts: Vec<LinearPredictorParts>,
    trees: Vec<Tree>,
    prior: TreePrior,
    concentration: f64,
    sigma_mu: f64,
    lambda: Vec<f64>,
    iteration: usize,
    stats: ChainStats,
}

impl<'a> Chain<'a> {
    pub fn new(data: &'a Dataset, config: SamplerConfig) -> Result<Self, SamplerError> {
        config.validate()?;
        if data.is_empty() {
            return Err(SamplerError::EmptyDataset);
        }
        let q = data.n_confounders();
        let (beta, cov) = if q > 0 {
            let fit = clr_fit(data, false)?;
            (fit.beta_hat, fit.covariance)
        } else {
            (Vec::new(), Vec::new())
        };
        let p = data.n_moderators().max(1);
        let prior = TreePrior::new(config.gamma, config.xi, p);
        let m = config.n_trees;
        let prior_scale = config.k / (m as f64).sqrt();
        let sigma_mu = config.fixed_sigma_mu.unwrap_or(prior_scale);
        let parts: Vec<_> = data
            .strata
            .iter()
            .map(|s| LinearPredictorParts::new(s, &beta))
            .collect();
        let lambda = vec![0.0; data.len()];
        let beta_ll = parts.iter().map(|pt| pt.loglik(0.0)).sum();
        let initial_beta_scale = if q > 0 { 2.38 * 2.38 / q as f64 } else { 1.0 };
        Ok(Self {
            data,
            moderators: data.moderator_matrix(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            beta,
            beta_ll,
            beta_chol: cholesky_lower(&cov),
            beta_scale: AdaptiveScale::new(initial_beta_scale, config.adapt_window, 0.18, 0.28),
            sigma_scale: AdaptiveScale::new(1.0, config.adapt_window, 0.35, 0.50),
            parts,
            trees: vec![Tree::default(); m],
            prior,
            concentration: p as f64,
            sigma_mu,
            lambda,
            iteration: 0,
            stats: ChainStats::default(),
            config,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn sigma_mu(&self) -> f64 {
        self.sigma_mu
    }

    /// Incrementally maintained ensemble predictions λ_i.
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn recomputed_lambda(&self) -> Vec<f64> {
        self.moderators
            .iter()
            .map(|w| forest_predict(&self.trees, w))
            .collect()
    }

    fn split_counts(&self) -> Vec<usize> {
        let p = self.prior.s.len();
        let mut counts = vec![0; p];
        for t in &self.trees {
            for (c, u) in counts.iter_mut().zip(t.split_counts(p)) {
                *c += u;
            }
        }
        counts
    }

    /// One full iteration.
    pub fn step(&mut self) -> Result<(), SamplerError> {
        let adapting = self.iteration < self.config.burn_in;
        if !self.beta.is_empty() {
            let (beta, ll, accepted) = update_beta(
                &self.data.strata,
                &self.beta,
                self.beta_ll,
                &self.lambda,
                &self.beta_chol,
                self.beta_scale.scale,
                self.config.beta_prior,
                &mut self.rng,
            );
            self.beta_scale.record(accepted, adapting);
            if !adapting {
                self.stats.beta.proposed += 1;
                self.stats.beta.accepted += usize::from(accepted);
            }
            if accepted {
                self.beta = beta;
                self.beta_ll = ll;
                self.parts = self
                    .data
                    .strata
                    .iter()
                    .map(|s| LinearPredictorParts::new(s, &self.beta))
                    .collect();
            }
        }

        let n = self.lambda.len();
        let mut own = vec![0.0; n];
        let mut offsets = vec![0.0; n];
        for m in 0..self.trees.len() {
            for i in 0..n {
                own[i] = self.trees[m].predict(&self.moderators[i]);
                offsets[i] = self.lambda[i] - own[i];
            }
            let ctx = MoveContext {
                parts: &self.parts,
                moderators: &self.moderators,
                offsets: &offsets,
                prior: &self.prior,
                sigma_mu: self.sigma_mu,
                probs: self.config.move_probs,
            };
            let outcome = propose_move(&self.trees[m], &ctx, &mut self.rng);
            if !adapting {
                self.stats.record(outcome.kind, outcome.accepted);
            }
            if outcome.accepted {
                self.trees[m] = outcome.proposed_tree;
            }
            refresh_leaves(
                &mut self.trees[m],
                &self.parts,
                &self.moderators,
                &offsets,
                self.sigma_mu,
                &mut self.rng,
            )?;
            for i in 0..n {
                self.lambda[i] = offsets[i] + self.trees[m].predict(&self.moderators[i]);
            }
        }

        if !self.config.fixed_split_probs {
            let counts = self.split_counts();
            self.prior.s = update_split_probs(self.concentration, &counts, &mut self.rng);
            self.concentration = update_concentration(&self.prior.s, &mut self.rng);
        }

        if self.config.fixed_sigma_mu.is_none() {
            let leaves: Vec<f64> = self.trees.iter().flat_map(|t| t.leaf_values()).collect();
            let prior_scale = self.config.k / (self.trees.len() as f64).sqrt();
            let step = self.config.sigma_mu_step * self.sigma_scale.scale.sqrt();
            let (sigma, accepted) =
                update_sigma_mu(self.sigma_mu, &leaves, prior_scale, step, &mut self.rng);
            self.sigma_mu = sigma;
            self.sigma_scale.record(accepted, adapting);
            if !adapting {
                self.stats.sigma_mu.proposed += 1;
                self.stats.sigma_mu.accepted += usize::from(accepted);
            }
        }

        self.iteration += 1;
        if self.config.debug_checks && self.iteration % 100 == 0 {
            let exact = self.recomputed_lambda();
            let drift = exact
                .iter()
                .zip(&self.lambda)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(drift < 1e-8, "ensemble prediction drift {drift}");
        }
        if self.iteration % self.config.refresh_every == 0 {
            self.lambda = self.recomputed_lambda();
        }
        if !self.beta.is_empty() {
            // τ changed during the sweep
            self.beta_ll = beta_loglik_parts(&self.parts, &self.lambda);
        }
        Ok(())
    }

    pub fn draw(&self) -> Draw {
        let loglik: Vec<f64> = self
            .parts
            .iter()
            .zip(&self.lambda)
            .map(|(p, &t)| p.loglik(t))
            .collect();
        let total_loglik = loglik.iter().sum();
        Draw {
            iteration: self.iteration,
            beta: self.beta.clone(),
            tau: self.lambda.clone(),
            sigma_mu: self.sigma_mu,
            concentration: self.concentration,
            split_probs: self.prior.s.clone(),
            node_counts: self.trees.iter().map(Tree::n_nodes).collect(),
            split_counts: self.split_counts(),
            loglik,
            total_loglik,
            forest: if self.config.keep_forests {
                self.trees.clone()
            } else {
                Vec::new()
            },
        }
    }

    fn finish_stats(&self) -> ChainStats {
        let mut stats = self.stats.clone();
        stats.final_beta_scale = self.beta_scale.scale;
        stats.final_sigma_mu_step = self.config.sigma_mu_step * self.sigma_scale.scale.sqrt();
        stats
    }
}

fn beta_loglik_parts(parts: &[LinearPredictorParts], tau: &[f64]) -> f64 {
    parts.iter().zip(tau).map(|(p, &t)| p.loglik(t)).sum()
}

/// Runs a full chain and keeps every `thin`-th post-burn-in draw.
pub fn run_chain(data: &Dataset, config: &SamplerConfig) -> Result<PosteriorDraws, SamplerError> {
    run_chain_with(data, config, |_| {})
}

/// [`run_chain`] with a callback invoked after every iteration.
pub fn run_chain_with(
    data: &Dataset,
    config: &SamplerConfig,
    mut progress: impl FnMut(usize),
) -> Result<PosteriorDraws, SamplerError> {
    let mut chain = Chain::new(data, config.clone())?;
    let mut draws = Vec::with_capacity(config.kept_draws());
    for it in 0..config.iterations {
        chain.step()?;
        if it >= config.burn_in && (it - config.burn_in + 1) % config.thin == 0 {
            draws.push(chain.draw());
        }
        progress(it + 1);
    }
    Ok(PosteriorDraws {
        config: config.clone(),
        draws,
        stats: chain.finish_stats(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waic {
    pub waic: f64,
    pub p_waic: f64,
    pub lppd: f64,
    /// Set when only one draw was available, so `p_waic` is zero by fiat.
    pub single_draw: bool,
}

/// WAIC from a draws × strata matrix of pointwise log-likelihoods.
pub fn compute_waic(matrix: &[Vec<f64>]) -> Waic {
    let s = matrix.len();
    let n = matrix.first().map_or(0, Vec::len);
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    let mut column = vec![0.0; s];
    for i in 0..n {
        for (c, row) in column.iter_mut().zip(matrix) {
            *c = row[i];
        }
        lppd += log_sum_exp(&column) - (s as f64).ln();
        if s > 1 {
            let mean = column.iter().sum::<f64>() / s as f64;
            p_waic += column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1) as f64;
        }
    }
    Waic {
        waic: -2.0 * (lppd - p_waic),
        p_waic,
        lppd,
        single_draw: s == 1,
    }
}

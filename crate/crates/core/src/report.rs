//! The fit summary: everything is computed from a draws header and its
//! draws, so `fit` and `summarize` produce identical reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::draws::DrawsHeader;
use crate::posterior::{
    average_effect, cart_summary, default_min_leaf, individual_effects, marginal_contribution,
    summarize, variable_importance, EffectSummary, PosteriorError, Scale,
};
use crate::sampler::{compute_waic, ChainStats, Draw, Waic};
use crate::strata::ModeratorKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummaryConfig {
    /// Credible level of all intervals.
    pub level: f64,
    /// Moderator names the CART summary may split on; all when absent.
    pub cart_subset: Option<Vec<String>>,
    pub cart_max_depth: usize,
    /// Minimum strata per CART leaf; 5% of the strata when absent.
    pub cart_min_leaf: Option<usize>,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        Self {
            level: 0.95,
            cart_subset: None,
            cart_max_depth: 3,
            cart_min_leaf: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedEffect {
    pub name: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl NamedEffect {
    fn new(name: &str, s: &EffectSummary) -> Self {
        Self {
            name: name.to_string(),
            mean: s.mean,
            lower: s.lower,
            upper: s.upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartLeafReport {
    pub rule: String,
    pub n: usize,
    /// Posterior mean log odds ratio averaged over the leaf's strata.
    pub mean_tau: f64,
    /// Leaf average of the individual odds ratios, summarized per draw.
    pub odds_ratio: NamedEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartReport {
    pub subset: Vec<String>,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub summary_r2: f64,
    pub leaves: Vec<CartLeafReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub n_strata: usize,
    pub n_draws: usize,
    pub level: f64,
    pub average_effect: NamedEffect,
    pub average_odds_ratio: NamedEffect,
    pub beta: Vec<NamedEffect>,
    pub sigma_mu: NamedEffect,
    pub mean_nodes_per_tree: f64,
    pub waic: Waic,
    pub variable_importance: Vec<NamedEffect>,
    pub importance_all_zero_draws: usize,
    /// Ratio of odds ratios between w = 1 and w = 0 for each binary moderator.
    pub marginal_odds_ratios: Vec<NamedEffect>,
    pub cart: Option<CartReport>,
    pub stats: ChainStats,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReportError {
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error("unknown moderator {0:?} in cart_subset")]
    UnknownModerator(String),
}

pub fn build_report(header: &DrawsHeader, draws: &[Draw], cfg: &SummaryConfig) -> Result<Report, ReportError> {
    let level = cfg.level;
    let names = &header.moderator_names;
    let w = &header.moderators;
    let avg = average_effect(draws, Scale::Log, level)?;
    let avg_or = average_effect(draws, Scale::OddsRatio, level)?;
    let beta = header
        .confounder_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let v: Vec<f64> = draws.iter().map(|d| d.beta[j]).collect();
            NamedEffect::new(name, &summarize(&v, level))
        })
        .collect();
    let sigma: Vec<f64> = draws.iter().map(|d| d.sigma_mu).collect();
    let nodes: f64 = draws
        .iter()
        .map(|d| d.node_counts.iter().sum::<usize>() as f64 / d.node_counts.len().max(1) as f64)
        .sum::<f64>()
        / draws.len() as f64;
    let matrix: Vec<Vec<f64>> = draws.iter().map(|d| d.loglik.clone()).collect();
    let vi = variable_importance(draws, level)?;
    let variable_importance = names
        .iter()
        .enumerate()
        .map(|(j, n)| NamedEffect {
            name: n.clone(),
            mean: vi.mean[j],
            lower: vi.lower[j],
            upper: vi.upper[j],
        })
        .collect();

    let has_forests = draws.iter().all(|d| !d.forest.is_empty());
    let mut marginal = Vec::new();
    if has_forests {
        for (j, kind) in header.moderator_kinds.iter().enumerate() {
            if *kind == ModeratorKind::Binary {
                let s = marginal_contribution(draws, w, &header.moderator_kinds, j, Scale::OddsRatio, level)?;
                marginal.push(NamedEffect::new(&names[j], &s));
            }
        }
    }

    let subset: Vec<usize> = match &cfg.cart_subset {
        None => (0..names.len()).collect(),
        Some(sel) => sel
            .iter()
            .map(|s| {
                names
                    .iter()
                    .position(|n| n == s)
                    .ok_or_else(|| ReportError::UnknownModerator(s.clone()))
            })
            .collect::<Result<_, _>>()?,
    };
    let cart = (!subset.is_empty()).then(|| -> Result<CartReport, ReportError> {
        let tau_hat: Vec<f64> = individual_effects(draws, Scale::Log, level)?
            .iter()
            .map(|s| s.mean)
            .collect();
        let min_leaf = cfg.cart_min_leaf.unwrap_or_else(|| default_min_leaf(tau_hat.len()));
        let c = cart_summary(&tau_hat, w, &subset, cfg.cart_max_depth, min_leaf);
        let leaves = c
            .leaves
            .iter()
            .map(|leaf| {
                let members: Vec<usize> = (0..w.len())
                    .filter(|&i| {
                        leaf.conditions
                            .iter()
                            .all(|c| (w[i][c.var] > c.cut) == c.above)
                    })
                    .collect();
                let per_draw: Vec<f64> = draws
                    .iter()
                    .map(|d| members.iter().map(|&i| d.tau[i].exp()).sum::<f64>() / members.len() as f64)
                    .collect();
                let rule = if leaf.conditions.is_empty() {
                    "(all)".to_string()
                } else {
                    leaf.conditions
                        .iter()
                        .map(|c| format!("{} {} {}", names[c.var], if c.above { ">" } else { "<=" }, c.cut))
                        .collect::<Vec<_>>()
                        .join(" & ")
                };
                CartLeafReport {
                    odds_ratio: NamedEffect::new(&rule, &summarize(&per_draw, level)),
                    rule,
                    n: leaf.n,
                    mean_tau: leaf.mean,
                }
            })
            .collect();
        Ok(CartReport {
            subset: c.subset.iter().map(|&j| names[j].clone()).collect(),
            max_depth: cfg.cart_max_depth,
            min_leaf,
            summary_r2: c.summary_r2,
            leaves,
        })
    });
    let cart = cart.transpose()?;

    Ok(Report {
        n_strata: header.stratum_ids.len(),
        n_draws: draws.len(),
        level,
        average_effect: NamedEffect::new("tau_bar", &avg),
        average_odds_ratio: NamedEffect::new("exp(tau_bar)", &avg_or),
        beta,
        sigma_mu: NamedEffect::new("sigma_mu", &summarize(&sigma, level)),
        mean_nodes_per_tree: nodes,
        waic: compute_waic(&matrix),
        variable_importance,
        importance_all_zero_draws: vi.all_zero_draws,
        marginal_odds_ratios: marginal,
        cart,
        stats: header.stats.clone(),
    })
}

fn row(out: &mut String, e: &NamedEffect) {
    let _ = writeln!(out, "  {:<28} {:>10.4} {:>10.4} {:>10.4}", e.name, e.mean, e.lower, e.upper);
}

fn table(out: &mut String, title: &str, rows: &[NamedEffect], level: f64) {
    let _ = writeln!(out, "{title}");
    let _ = writeln!(
        out,
        "  {:<28} {:>10} {:>10} {:>10}",
        "",
        "mean",
        format!("{:.1}%", 50.0 * (1.0 - level)),
        format!("{:.1}%", 100.0 - 50.0 * (1.0 - level))
    );
    for r in rows {
        row(out, r);
    }
    out.push('\n');
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "strata {}   kept draws {}\n", self.n_strata, self.n_draws);
        table(
            &mut s,
            "Average exposure effect",
            &[self.average_effect.clone(), self.average_odds_ratio.clone()],
            self.level,
        );
        if !self.beta.is_empty() {
            table(&mut s, "Confounder coefficients (log odds ratio)", &self.beta, self.level);
        }
        table(&mut s, "Leaf scale", std::slice::from_ref(&self.sigma_mu), self.level);
        let _ = writeln!(s, "Mean nodes per tree  {:.3}\n", self.mean_nodes_per_tree);
        let _ = writeln!(
            s,
            "WAIC {:.3}   p_waic {:.3}   lppd {:.3}{}\n",
            self.waic.waic,
            self.waic.p_waic,
            self.waic.lppd,
            if self.waic.single_draw { "   (single draw: p_waic set to 0)" } else { "" }
        );
        table(&mut s, "Variable importance (split proportions)", &self.variable_importance, self.level);
        if self.importance_all_zero_draws > 0 {
            let _ = writeln!(s, "  {} draws had no splits\n", self.importance_all_zero_draws);
        }
        if !self.marginal_odds_ratios.is_empty() {
            table(
                &mut s,
                "Marginal contributions (ratio of odds ratios, w = 1 vs w = 0)",
                &self.marginal_odds_ratios,
                self.level,
            );
        }
        if let Some(c) = &self.cart {
            let _ = writeln!(
                s,
                "CART summary of posterior-mean effects (depth <= {}, min leaf {}): summary R2 {:.4}",
                c.max_depth, c.min_leaf, c.summary_r2
            );
            let _ = writeln!(s, "  {:<48} {:>6} {:>9} {:>9} {:>9}", "leaf", "n", "OR", "lower", "upper");
            for l in &c.leaves {
                let _ = writeln!(
                    s,
                    "  {:<48} {:>6} {:>9.4} {:>9.4} {:>9.4}",
                    l.rule, l.n, l.odds_ratio.mean, l.odds_ratio.lower, l.odds_ratio.upper
                );
            }
            s.push('\n');
        }
        let rate = |m: crate::sampler::MoveStats| {
            if m.proposed == 0 {
                "-".to_string()
            } else {
                format!("{:.3} ({} proposed)", m.accepted as f64 / m.proposed as f64, m.proposed)
            }
        };
        let _ = writeln!(s, "Post-burn-in acceptance rates");
        let _ = writeln!(s, "  grow      {}", rate(self.stats.grow));
        let _ = writeln!(s, "  prune     {}", rate(self.stats.prune));
        let _ = writeln!(s, "  change    {}", rate(self.stats.change));
        let _ = writeln!(s, "  beta      {}", rate(self.stats.beta));
        let _ = writeln!(s, "  sigma_mu  {}", rate(self.stats.sigma_mu));
        s
    }
}

//! Posterior summaries: average and individual effects, partial dependence,
//! marginal contributions of binary moderators, variable importance, and a
//! single-tree (CART) summary of the posterior-mean effects.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::{forest_predict, Node, SplitRule, Tree};
use crate::sampler::Draw;
use crate::strata::ModeratorKind;

#[derive(Debug, Error, PartialEq)]
pub enum PosteriorError {
    #[error("no posterior draws")]
    NoDraws,
    #[error("draws do not carry forests; rerun with keep_forests enabled")]
    MissingForests,
    #[error("moderator {0} is out of range")]
    BadModerator(usize),
    #[error("moderator {0} is continuous; use partial dependence with explicit values")]
    NotBinary(usize),
}

/// Scale on which effects are reported; odds ratios are computed per draw.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Log,
    OddsRatio,
}

impl Scale {
    fn apply(self, v: f64) -> f64 {
        match self {
            Scale::Log => v,
            Scale::OddsRatio => v.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draws: Option<Vec<f64>>,
}

/// Inverted empirical CDF: the smallest order statistic whose ECDF is ≥ p.
pub fn quantile_type1(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let k = ((n as f64 * p).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Mean and equal-tailed interval of `values`.
pub fn summarize(values: &[f64], level: f64) -> EffectSummary {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    EffectSummary {
        mean: values.iter().sum::<f64>() / values.len() as f64,
        lower: quantile_type1(&sorted, alpha),
        upper: quantile_type1(&sorted, 1.0 - alpha),
        level,
        draws: None,
    }
}

fn check(draws: &[Draw]) -> Result<(), PosteriorError> {
    if draws.is_empty() {
        Err(PosteriorError::NoDraws)
    } else {
        Ok(())
    }
}

fn check_forests(draws: &[Draw]) -> Result<(), PosteriorError> {
    check(draws)?;
    if draws.iter().any(|d| d.forest.is_empty()) {
        return Err(PosteriorError::MissingForests);
    }
    Ok(())
}

/// τ̄ = mean over strata of τ_i, per draw.
pub fn average_effect(draws: &[Draw], scale: Scale, level: f64) -> Result<EffectSummary, PosteriorError> {
    check(draws)?;
    let values: Vec<f64> = draws.iter().map(|d| scale.apply(d.mean_tau())).collect();
    Ok(summarize(&values, level))
}

pub fn individual_effects(
    draws: &[Draw],
    scale: Scale,
    level: f64,
) -> Result<Vec<EffectSummary>, PosteriorError> {
    check(draws)?;
    let n = draws[0].tau.len();
    Ok((0..n)
        .map(|i| {
            let v: Vec<f64> = draws.iter().map(|d| scale.apply(d.tau[i])).collect();
            summarize(&v, level)
        })
        .collect())
}

/// Average forest prediction over all strata with the `fixed` components of
/// each w_i overridden.
pub fn partial_average(forest: &[Tree], moderators: &[Vec<f64>], fixed: &[(usize, f64)]) -> f64 {
    let mut w = Vec::new();
    let total: f64 = moderators
        .iter()
        .map(|wi| {
            w.clear();
            w.extend_from_slice(wi);
            for &(p, v) in fixed {
                w[p] = v;
            }
            forest_predict(forest, &w)
        })
        .sum();
    total / moderators.len() as f64
}

fn check_fixed(moderators: &[Vec<f64>], fixed: &[(usize, f64)]) -> Result<(), PosteriorError> {
    let p = moderators.first().map_or(0, Vec::len);
    match fixed.iter().find(|(v, _)| *v >= p) {
        Some(&(v, _)) => Err(PosteriorError::BadModerator(v)),
        None => Ok(()),
    }
}

pub fn partial_dependence(
    draws: &[Draw],
    moderators: &[Vec<f64>],
    fixed: &[(usize, f64)],
    scale: Scale,
    level: f64,
) -> Result<EffectSummary, PosteriorError> {
    check_forests(draws)?;
    check_fixed(moderators, fixed)?;
    let values: Vec<f64> = draws
        .iter()
        .map(|d| scale.apply(partial_average(&d.forest, moderators, fixed)))
        .collect();
    Ok(summarize(&values, level))
}

/// Difference of partial averages at w_p = 1 and w_p = 0 (a ratio of odds
/// ratios on the odds-ratio scale).
pub fn marginal_contribution(
    draws: &[Draw],
    moderators: &[Vec<f64>],
    kinds: &[ModeratorKind],
    var: usize,
    scale: Scale,
    level: f64,
) -> Result<EffectSummary, PosteriorError> {
    check_forests(draws)?;
    match kinds.get(var) {
        None => return Err(PosteriorError::BadModerator(var)),
        Some(ModeratorKind::Continuous) => return Err(PosteriorError::NotBinary(var)),
        Some(ModeratorKind::Binary) => {}
    }
    let values: Vec<f64> = draws
        .iter()
        .map(|d| {
            let one = partial_average(&d.forest, moderators, &[(var, 1.0)]);
            let zero = partial_average(&d.forest, moderators, &[(var, 0.0)]);
            scale.apply(one - zero)
        })
        .collect();
    Ok(summarize(&values, level))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableImportance {
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Draws in which the forest made no splits at all (proportions all zero).
    pub all_zero_draws: usize,
}

/// Split proportions u_p / Σu per draw, summarized per moderator.
pub fn variable_importance(draws: &[Draw], level: f64) -> Result<VariableImportance, PosteriorError> {
    check(draws)?;
    let p = draws[0].split_counts.len();
    let mut all_zero = 0;
    let props: Vec<Vec<f64>> = draws
        .iter()
        .map(|d| {
            let total: usize = d.split_counts.iter().sum();
            if total == 0 {
                all_zero += 1;
                vec![0.0; p]
            } else {
                d.split_counts.iter().map(|&u| u as f64 / total as f64).collect()
            }
        })
        .collect();
    let mut out = VariableImportance {
        mean: Vec::with_capacity(p),
        lower: Vec::with_capacity(p),
        upper: Vec::with_capacity(p),
        all_zero_draws: all_zero,
    };
    for j in 0..p {
        let v: Vec<f64> = props.iter().map(|r| r[j]).collect();
        let s = summarize(&v, level);
        out.mean.push(s.mean);
        out.lower.push(s.lower);
        out.upper.push(s.upper);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub var: usize,
    pub cut: f64,
    /// `true` for `w[var] > cut`, `false` for `w[var] ≤ cut`.
    pub above: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartLeaf {
    pub conditions: Vec<Condition>,
    pub n: usize,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartSummary {
    pub subset: Vec<usize>,
    /// Leaf values are the mean of the summarized effects in each leaf.
    pub tree: Tree,
    pub leaves: Vec<CartLeaf>,
    pub summary_r2: f64,
}

pub fn default_min_leaf(n: usize) -> usize {
    ((0.05 * n as f64).ceil() as usize).max(1)
}

fn sse(values: &[f64], idx: &[usize]) -> f64 {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| values[i]).sum::<f64>() / n;
    idx.iter().map(|&i| (values[i] - mean).powi(2)).sum()
}

struct CartBuilder<'a> {
    y: &'a [f64],
    w: &'a [Vec<f64>],
    subset: &'a [usize],
    max_depth: usize,
    min_leaf: usize,
    min_gain: f64,
    leaves: Vec<CartLeaf>,
    sse: f64,
}

impl CartBuilder<'_> {
    /// Best (gain, rule) over the subset; ties keep the lowest variable,
    /// then the lowest cut, by scanning in that order with a strict `>`.
    fn best_split(&self, idx: &[usize]) -> Option<(f64, SplitRule)> {
        let parent = sse(self.y, idx);
        let mut best: Option<(f64, SplitRule)> = None;
        for &var in self.subset {
            let mut order = idx.to_vec();
            order.sort_by(|&a, &b| self.w[a][var].total_cmp(&self.w[b][var]));
            let n = order.len();
            let total: f64 = order.iter().map(|&i| self.y[i]).sum();
            let total_sq: f64 = order.iter().map(|&i| self.y[i] * self.y[i]).sum();
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let i = order[k];
                s += self.y[i];
                sq += self.y[i] * self.y[i];
                let cut = self.w[i][var];
                if cut == self.w[order[k + 1]][var] {
                    continue;
                }
                let (nl, nr) = (k + 1, n - k - 1);
                if nl < self.min_leaf || nr < self.min_leaf {
                    continue;
                }
                let left = sq - s * s / nl as f64;
                let right = (total_sq - sq) - (total - s).powi(2) / nr as f64;
                let gain = parent - left.max(0.0) - right.max(0.0);
                if best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, SplitRule { var, cut }));
                }
            }
        }
        best.filter(|(g, _)| *g > self.min_gain)
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize, conditions: Vec<Condition>) -> Node {
        let split = if depth < self.max_depth && idx.len() >= 2 * self.min_leaf {
            self.best_split(&idx)
        } else {
            None
        };
        match split {
            Some((_, rule)) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    idx.iter().partition(|&&i| rule.goes_left(&self.w[i]));
                let cond = |above| Condition {
                    var: rule.var,
                    cut: rule.cut,
                    above,
                };
                let mut lc = conditions.clone();
                lc.push(cond(false));
                let mut rc = conditions;
                rc.push(cond(true));
                let left = self.grow(l, depth + 1, lc);
                let right = self.grow(r, depth + 1, rc);
                Node::split(rule, left, right)
            }
            None => {
                let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / idx.len() as f64;
                self.sse += sse(self.y, &idx);
                self.leaves.push(CartLeaf {
                    conditions,
                    n: idx.len(),
                    mean,
                });
                Node::leaf(mean)
            }
        }
    }
}

/// Greedy variance-reduction regression tree of `tau_hat` on the moderators
/// in `subset`, with its summary R² = 1 − SSE/SST (1 when SST = 0).
pub fn cart_summary(
    tau_hat: &[f64],
    moderators: &[Vec<f64>],
    subset: &[usize],
    max_depth: usize,
    min_leaf: usize,
) -> CartSummary {
    let n = tau_hat.len();
    let all: Vec<usize> = (0..n).collect();
    let constant = tau_hat.windows(2).all(|p| p[0] == p[1]);
    let sst = if constant { 0.0 } else { sse(tau_hat, &all) };
    let mut subset = subset.to_vec();
    subset.sort_unstable();
    subset.dedup();
    let mut b = CartBuilder {
        y: tau_hat,
        w: moderators,
        subset: &subset,
        max_depth,
        min_leaf: min_leaf.max(1),
        min_gain: 1e-12 * sst,
        leaves: Vec::new(),
        sse: 0.0,
    };
    let root = if n == 0 { Node::leaf(0.0) } else { b.grow(all, 0, Vec::new()) };
    let summary_r2 = if sst > 0.0 {
        (1.0 - b.sse / sst).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let leaves = b.leaves;
    CartSummary {
        subset,
        tree: Tree { root },
        leaves,
        summary_r2,
    }
}

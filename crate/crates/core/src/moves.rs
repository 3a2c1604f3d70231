//! Reversible-jump tree proposals: grow, prune and change.
//!
//! Leaf parameters created by a proposal are drawn from a Normal
//! approximation to their conditional posterior (mode and curvature of the
//! penalized conditional log-likelihood). The acceptance ratio combines the
//! prior, the likelihood of the strata in the affected leaves (offset by the
//! rest of the ensemble), the structural proposal probabilities and the
//! densities of the leaf-parameter proposals in both directions.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::clr::LinearPredictorParts;
use crate::forest::{rule_log_prob, sample_split_rule, Node, NodePath, SplitRule, Tree, TreePrior};
use crate::numeric::{brent_minimize, brent_root, normal_log_density};

pub const FISHER_TOLERANCE: f64 = 1e-8;
pub const FISHER_MAX_ITER: usize = 50;

/// Conditional log-posterior of a single leaf parameter μ over the strata
/// routed to the leaf: `Σ ℓ_i(λ_i + μ) + log N(μ | 0, σ_μ²)`.
#[derive(Debug, Clone, Copy)]
pub struct NodeTarget<'a> {
    pub parts: &'a [LinearPredictorParts],
    pub offsets: &'a [f64],
    pub members: &'a [usize],
    pub sigma_mu: f64,
}

impl<'a> NodeTarget<'a> {
    pub fn new(
        parts: &'a [LinearPredictorParts],
        offsets: &'a [f64],
        members: &'a [usize],
        sigma_mu: f64,
    ) -> Self {
        Self {
            parts,
            offsets,
            members,
            sigma_mu,
        }
    }

    pub fn loglik(&self, mu: f64) -> f64 {
        self.members
            .iter()
            .map(|&i| self.parts[i].loglik(self.offsets[i] + mu))
            .sum()
    }

    /// Likelihood-only `(loglik, score, information)`.
    pub fn lik_derivs(&self, mu: f64) -> (f64, f64, f64) {
        self.members.iter().fold((0.0, 0.0, 0.0), |acc, &i| {
            let (l, u, h) = self.parts[i].loglik_score_info(self.offsets[i] + mu);
            (acc.0 + l, acc.1 + u, acc.2 + h)
        })
    }

    pub fn log_prior(&self, mu: f64) -> f64 {
        normal_log_density(mu, 0.0, self.sigma_mu)
    }

    pub fn log_posterior(&self, mu: f64) -> f64 {
        self.loglik(mu) + self.log_prior(mu)
    }

    /// Log-posterior and its derivative.
    pub fn eval(&self, mu: f64) -> (f64, f64) {
        let (l, u, _) = self.lik_derivs(mu);
        let s2 = self.sigma_mu * self.sigma_mu;
        (l + self.log_prior(mu), u - mu / s2)
    }
}

/// Normal approximation `N(mean, sd²)` to a leaf's conditional posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceFit {
    pub mean: f64,
    pub sd: f64,
    /// True when the mode came from the bracketed fallback.
    pub fallback: bool,
}

impl LaplaceFit {
    pub fn log_density(&self, x: f64) -> f64 {
        normal_log_density(x, self.mean, self.sd)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> LeafProposal {
        let e: f64 = StandardNormal.sample(rng);
        let value = self.mean + self.sd * e;
        LeafProposal {
            m: self.mean,
            v: self.sd,
            value,
            log_density: self.log_density(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafProposal {
    pub m: f64,
    pub v: f64,
    pub value: f64,
    pub log_density: f64,
}

fn curvature_sd(target: &NodeTarget<'_>, m: f64) -> Option<f64> {
    let (_, _, info) = target.lik_derivs(m);
    let precision = info + 1.0 / (target.sigma_mu * target.sigma_mu);
    let sd = precision.sqrt().recip();
    (sd.is_finite() && sd > 0.0).then_some(sd)
}

/// Mode and curvature of the leaf posterior by Fisher scoring from
/// `warm_start`, falling back to bracketed scalar optimization when scoring
/// fails to converge. `None` when both fail.
pub fn laplace_fit(target: &NodeTarget<'_>, warm_start: f64) -> Option<LaplaceFit> {
    let inv_s2 = 1.0 / (target.sigma_mu * target.sigma_mu);
    let mut mu = if warm_start.is_finite() { warm_start } else { 0.0 };
    for _ in 0..FISHER_MAX_ITER {
        let (_, u, info) = target.lik_derivs(mu);
        let grad = u - mu * inv_s2;
        let precision = info + inv_s2;
        if !grad.is_finite() || !precision.is_finite() {
            break;
        }
        // in flat posteriors a small gradient can still mean a large step
        if grad.abs() < FISHER_TOLERANCE && (grad / precision).abs() < FISHER_TOLERANCE {
            let sd = precision.sqrt().recip();
            return Some(LaplaceFit {
                mean: mu,
                sd,
                fallback: false,
            });
        }
        mu += grad / precision;
    }
    laplace_fallback(target, warm_start)
}

fn laplace_fallback(target: &NodeTarget<'_>, warm_start: f64) -> Option<LaplaceFit> {
    let m0 = if warm_start.is_finite() { warm_start } else { 0.0 };
    let score = |mu: f64| target.lik_derivs(mu).1;
    // likelihood-only maximizer: expand [m0 - 5, m0 + 5] until the score
    // changes sign
    let (mut lo, mut hi) = (m0 - 5.0, m0 + 5.0);
    let mut width = 5.0;
    let mut bracketed = false;
    for _ in 0..40 {
        let (slo, shi) = (score(lo), score(hi));
        if slo > 0.0 && shi < 0.0 {
            bracketed = true;
            break;
        }
        if slo == 0.0 && shi == 0.0 {
            break;
        }
        width *= 2.0;
        if slo <= 0.0 {
            lo -= width;
        }
        if shi >= 0.0 {
            hi += width;
        }
    }
    let anchor = if bracketed {
        brent_root(score, lo, hi, 1e-10)?
    } else if score(hi) > 0.0 {
        hi
    } else if score(lo) < 0.0 {
        lo
    } else {
        0.0
    };
    // the penalized mode lies between the prior mode and the likelihood mode
    let (a, b) = (anchor.min(0.0), anchor.max(0.0));
    let m = if a == b {
        a
    } else {
        brent_minimize(|mu| -target.log_posterior(mu), a, b, 1e-10)
    };
    if !bracketed && anchor != 0.0 && (m - anchor).abs() < 1e-6 {
        // optimum pinned at the edge of an unbounded likelihood
        return None;
    }
    let (_, u, _) = target.lik_derivs(m);
    let grad = u - m / (target.sigma_mu * target.sigma_mu);
    if !grad.is_finite() {
        return None;
    }
    curvature_sd(target, m).map(|sd| LaplaceFit {
        mean: m,
        sd,
        fallback: true,
    })
}

/// Laplace fit followed by a draw from it.
pub fn laplace_leaf_proposal<R: Rng + ?Sized>(
    target: &NodeTarget<'_>,
    warm_start: f64,
    rng: &mut R,
) -> Option<LeafProposal> {
    laplace_fit(target, warm_start).map(|f| f.draw(rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveProbabilities {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
}

impl Default for MoveProbabilities {
    fn default() -> Self {
        Self {
            grow: 0.3,
            prune: 0.3,
            change: 0.4,
        }
    }
}

impl MoveProbabilities {
    pub fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> MoveKind {
        let total = self.grow + self.prune + self.change;
        let u = rng.random::<f64>() * total;
        if u < self.grow {
            MoveKind::Grow
        } else if u < self.grow + self.prune {
            MoveKind::Prune
        } else {
            MoveKind::Change
        }
    }

    fn p_grow(&self, _tree: &Tree) -> f64 {
        self.grow
    }

    fn p_prune(&self, tree: &Tree) -> f64 {
        if tree.root.is_leaf() {
            0.0
        } else {
            self.prune
        }
    }
}

/// Everything a tree update sees of the rest of the model.
#[derive(Debug, Clone, Copy)]
pub struct MoveContext<'a> {
    pub parts: &'a [LinearPredictorParts],
    pub moderators: &'a [Vec<f64>],
    /// Backfitting offsets `λ_i^r`: the other trees' predictions.
    pub offsets: &'a [f64],
    pub prior: &'a TreePrior,
    pub sigma_mu: f64,
    pub probs: MoveProbabilities,
}

impl<'a> MoveContext<'a> {
    fn target(&self, members: &'a [usize]) -> NodeTarget<'a> {
        NodeTarget::new(self.parts, self.offsets, members, self.sigma_mu)
    }

    fn rows(&self, members: &[usize]) -> Vec<&'a [f64]> {
        members.iter().map(|&i| self.moderators[i].as_slice()).collect()
    }

    fn split_members(&self, members: &[usize], rule: SplitRule) -> (Vec<usize>, Vec<usize>) {
        members
            .iter()
            .partition(|&&i| rule.goes_left(&self.moderators[i]))
    }

    fn fit(&self, members: &[usize], warm: f64) -> Option<LaplaceFit> {
        laplace_fit(&self.target(members), warm)
    }

    fn loglik(&self, members: &[usize], mu: f64) -> f64 {
        self.target(members).loglik(mu)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveOutcome {
    pub kind: MoveKind,
    /// Node the move acted on; `None` for moves rejected before a node was picked.
    pub node: Option<NodePath>,
    pub proposed_tree: Tree,
    pub log_accept_ratio: f64,
    pub accepted: bool,
}

fn weighted_mean(a: f64, na: usize, b: f64, nb: usize) -> f64 {
    let n = (na + nb) as f64;
    if n == 0.0 {
        0.5 * (a + b)
    } else {
        (a * na as f64 + b * nb as f64) / n
    }
}

/// Laplace fits for the three nodes a grow/prune pair touches.
#[derive(Debug, Clone, Copy)]
struct PairFits {
    merged: Option<LaplaceFit>,
    left: Option<LaplaceFit>,
    right: Option<LaplaceFit>,
}

/// `log r` for growing `small` into `big` at `node`. The prune from `big`
/// back to `small` has exactly the negated ratio.
fn grow_log_ratio(
    small: &Tree,
    big: &Tree,
    node: &NodePath,
    ctx: &MoveContext<'_>,
    fits: PairFits,
) -> Option<f64> {
    let d = node.depth();
    let members = small.members(node, ctx.moderators);
    let rule = big.get(node).rule()?;
    let (mu_l, mu_r) = big.get(node).leaf_children()?;
    let mu = small.get(node).mu()?;
    let (left, right) = ctx.split_members(&members, rule);
    if left.is_empty() || right.is_empty() {
        return None;
    }
    let (merged_fit, left_fit, right_fit) = (fits.merged?, fits.left?, fits.right?);
    let rows = ctx.rows(&members);
    // a cut outside the node-local candidates has zero prior mass
    let rule_lp = rule_log_prob(&rows, &ctx.prior.s, rule);
    if !rule_lp.is_finite() {
        return None;
    }
    let prior = ctx.prior.split_log_prior(d, rule, &rows)
        + ctx.prior.leaf_log_prior(d + 1, &ctx.rows(&left))
        + ctx.prior.leaf_log_prior(d + 1, &ctx.rows(&right))
        - ctx.prior.leaf_log_prior(d, &rows)
        + normal_log_density(mu_l, 0.0, ctx.sigma_mu)
        + normal_log_density(mu_r, 0.0, ctx.sigma_mu)
        - normal_log_density(mu, 0.0, ctx.sigma_mu);
    let lik = ctx.loglik(&left, mu_l) + ctx.loglik(&right, mu_r) - ctx.loglik(&members, mu);
    let structural = ctx.probs.p_prune(big).ln() - (big.nog_nodes().len() as f64).ln()
        - ctx.probs.p_grow(small).ln()
        + (small.n_leaves() as f64).ln()
        - rule_lp;
    let proposal = merged_fit.log_density(mu)
        - left_fit.log_density(mu_l)
        - right_fit.log_density(mu_r);
    let r = prior + lik + structural + proposal;
    (!r.is_nan()).then_some(r)
}

/// Old and new child fits of a change move.
#[derive(Debug, Clone, Copy)]
struct ChangeFits {
    old: (Option<LaplaceFit>, Option<LaplaceFit>),
    new: (Option<LaplaceFit>, Option<LaplaceFit>),
}

fn change_log_ratio(
    current: &Tree,
    proposed: &Tree,
    node: &NodePath,
    ctx: &MoveContext<'_>,
    fits: ChangeFits,
) -> Option<f64> {
    let d = node.depth();
    let members = current.members(node, ctx.moderators);
    let old_rule = current.get(node).rule()?;
    let new_rule = proposed.get(node).rule()?;
    let (old_l, old_r) = current.get(node).leaf_children()?;
    let (new_l, new_r) = proposed.get(node).leaf_children()?;
    let (ol, or) = ctx.split_members(&members, old_rule);
    let (nl, nr) = ctx.split_members(&members, new_rule);
    if nl.is_empty() || nr.is_empty() || ol.is_empty() || or.is_empty() {
        return None;
    }
    let rows = ctx.rows(&members);
    let (old_lp, new_lp) = (rule_log_prob(&rows, &ctx.prior.s, old_rule), rule_log_prob(&rows, &ctx.prior.s, new_rule));
    if !old_lp.is_finite() || !new_lp.is_finite() {
        return None;
    }
    let leaf_prior = |idx: &[usize]| ctx.prior.leaf_log_prior(d + 1, &ctx.rows(idx));
    let n = |x: f64| normal_log_density(x, 0.0, ctx.sigma_mu);
    let prior = ctx.prior.split_log_prior(d, new_rule, &rows)
        - ctx.prior.split_log_prior(d, old_rule, &rows)
        + leaf_prior(&nl)
        + leaf_prior(&nr)
        - leaf_prior(&ol)
        - leaf_prior(&or)
        + n(new_l)
        + n(new_r)
        - n(old_l)
        - n(old_r);
    let lik = ctx.loglik(&nl, new_l) + ctx.loglik(&nr, new_r)
        - ctx.loglik(&ol, old_l)
        - ctx.loglik(&or, old_r);
    let structural = old_lp - new_lp;
    let proposal = fits.old.0?.log_density(old_l) + fits.old.1?.log_density(old_r)
        - fits.new.0?.log_density(new_l)
        - fits.new.1?.log_density(new_r);
    let r = prior + lik + structural + proposal;
    (!r.is_nan()).then_some(r)
}

/// Log acceptance ratio of moving from `current` to `proposed` by a move of
/// `kind` at `node`. Leaf values are read from the two trees; the Laplace
/// proposal densities are recomputed from the data.
pub fn accept_ratio(
    kind: MoveKind,
    current: &Tree,
    proposed: &Tree,
    node: &NodePath,
    ctx: &MoveContext<'_>,
) -> f64 {
    let r = match kind {
        MoveKind::Grow => pair_fits(current, proposed, node, ctx)
            .and_then(|f| grow_log_ratio(current, proposed, node, ctx, f)),
        MoveKind::Prune => pair_fits(proposed, current, node, ctx)
            .and_then(|f| grow_log_ratio(proposed, current, node, ctx, f).map(|r| -r)),
        MoveKind::Change => change_fits(current, proposed, node, ctx)
            .and_then(|f| change_log_ratio(current, proposed, node, ctx, f)),
    };
    r.unwrap_or(f64::NEG_INFINITY)
}

fn pair_fits(small: &Tree, big: &Tree, node: &NodePath, ctx: &MoveContext<'_>) -> Option<PairFits> {
    let members = small.members(node, ctx.moderators);
    let rule = big.get(node).rule()?;
    let (mu_l, mu_r) = big.get(node).leaf_children()?;
    let mu = small.get(node).mu()?;
    let (left, right) = ctx.split_members(&members, rule);
    Some(PairFits {
        merged: ctx.fit(&members, weighted_mean(mu_l, left.len(), mu_r, right.len())),
        left: ctx.fit(&left, mu),
        right: ctx.fit(&right, mu),
    })
}

fn change_fits(
    current: &Tree,
    proposed: &Tree,
    node: &NodePath,
    ctx: &MoveContext<'_>,
) -> Option<ChangeFits> {
    let members = current.members(node, ctx.moderators);
    let (old_l, old_r) = current.get(node).leaf_children()?;
    let (new_l, new_r) = proposed.get(node).leaf_children()?;
    let (ol, or) = ctx.split_members(&members, current.get(node).rule()?);
    let (nl, nr) = ctx.split_members(&members, proposed.get(node).rule()?);
    let warm_new = weighted_mean(old_l, ol.len(), old_r, or.len());
    let warm_old = weighted_mean(new_l, nl.len(), new_r, nr.len());
    Some(ChangeFits {
        old: (ctx.fit(&ol, warm_old), ctx.fit(&or, warm_old)),
        new: (ctx.fit(&nl, warm_new), ctx.fit(&nr, warm_new)),
    })
}

fn rejected(kind: MoveKind, tree: &Tree, node: Option<NodePath>) -> MoveOutcome {
    MoveOutcome {
        kind,
        node,
        proposed_tree: tree.clone(),
        log_accept_ratio: f64::NEG_INFINITY,
        accepted: false,
    }
}

fn decide<R: Rng + ?Sized>(
    kind: MoveKind,
    node: NodePath,
    proposed_tree: Tree,
    log_r: Option<f64>,
    rng: &mut R,
) -> MoveOutcome {
    let log_r = log_r.unwrap_or(f64::NEG_INFINITY);
    let accepted = log_r >= 0.0 || rng.random::<f64>().ln() < log_r;
    MoveOutcome {
        kind,
        node: Some(node),
        proposed_tree,
        log_accept_ratio: log_r,
        accepted,
    }
}

/// Draws a move kind, builds the proposal and runs the Metropolis–Hastings
/// test. Random draws happen in a fixed order: kind, node, rule, leaf values,
/// acceptance uniform.
pub fn propose_move<R: Rng + ?Sized>(tree: &Tree, ctx: &MoveContext<'_>, rng: &mut R) -> MoveOutcome {
    let kind = ctx.probs.choose(rng);
    match kind {
        MoveKind::Grow => {
            let leaves = tree.leaves();
            let node = leaves[rng.random_range(0..leaves.len())].clone();
            let members = tree.members(&node, ctx.moderators);
            let rows = ctx.rows(&members);
            let Some(rule) = sample_split_rule(&rows, &ctx.prior.s, rng) else {
                return rejected(kind, tree, Some(node));
            };
            let (left, right) = ctx.split_members(&members, rule);
            if left.is_empty() || right.is_empty() {
                return rejected(kind, tree, Some(node));
            }
            let mu = tree.get(&node).mu().expect("grow acts on a leaf");
            let (Some(lf), Some(rf)) = (ctx.fit(&left, mu), ctx.fit(&right, mu)) else {
                return rejected(kind, tree, Some(node));
            };
            let (pl, pr) = (lf.draw(rng), rf.draw(rng));
            let proposed = tree.with_node(
                &node,
                Node::split(rule, Node::leaf(pl.value), Node::leaf(pr.value)),
            );
            let merged = ctx.fit(
                &members,
                weighted_mean(pl.value, left.len(), pr.value, right.len()),
            );
            let fits = PairFits {
                merged,
                left: Some(lf),
                right: Some(rf),
            };
            let log_r = grow_log_ratio(tree, &proposed, &node, ctx, fits);
            decide(kind, node, proposed, log_r, rng)
        }
        MoveKind::Prune => {
            let nog = tree.nog_nodes();
            if nog.is_empty() {
                return rejected(kind, tree, None);
            }
            let node = nog[rng.random_range(0..nog.len())].clone();
            let members = tree.members(&node, ctx.moderators);
            let rule = tree.get(&node).rule().expect("nog node splits");
            let (mu_l, mu_r) = tree.get(&node).leaf_children().expect("nog children");
            let (left, right) = ctx.split_members(&members, rule);
            let Some(mf) = ctx.fit(&members, weighted_mean(mu_l, left.len(), mu_r, right.len()))
            else {
                return rejected(kind, tree, Some(node));
            };
            let p = mf.draw(rng);
            let proposed = tree.with_node(&node, Node::leaf(p.value));
            let fits = PairFits {
                merged: Some(mf),
                left: ctx.fit(&left, p.value),
                right: ctx.fit(&right, p.value),
            };
            let log_r = grow_log_ratio(&proposed, tree, &node, ctx, fits).map(|r| -r);
            decide(kind, node, proposed, log_r, rng)
        }
        MoveKind::Change => {
            let nog = tree.nog_nodes();
            if nog.is_empty() {
                return rejected(kind, tree, None);
            }
            let node = nog[rng.random_range(0..nog.len())].clone();
            let members = tree.members(&node, ctx.moderators);
            let rows = ctx.rows(&members);
            let Some(rule) = sample_split_rule(&rows, &ctx.prior.s, rng) else {
                return rejected(kind, tree, Some(node));
            };
            let old_rule = tree.get(&node).rule().expect("nog node splits");
            let (old_l, old_r) = tree.get(&node).leaf_children().expect("nog children");
            let (ol, or) = ctx.split_members(&members, old_rule);
            let (nl, nr) = ctx.split_members(&members, rule);
            let warm_new = weighted_mean(old_l, ol.len(), old_r, or.len());
            let (Some(lf), Some(rf)) = (ctx.fit(&nl, warm_new), ctx.fit(&nr, warm_new)) else {
                return rejected(kind, tree, Some(node));
            };
            let (pl, pr) = (lf.draw(rng), rf.draw(rng));
            let proposed = tree.with_node(
                &node,
                Node::split(rule, Node::leaf(pl.value), Node::leaf(pr.value)),
            );
            let warm_old = weighted_mean(pl.value, nl.len(), pr.value, nr.len());
            let fits = ChangeFits {
                old: (ctx.fit(&ol, warm_old), ctx.fit(&or, warm_old)),
                new: (Some(lf), Some(rf)),
            };
            let log_r = change_log_ratio(tree, &proposed, &node, ctx, fits);
            decide(kind, node, proposed, log_r, rng)
        }
    }
}

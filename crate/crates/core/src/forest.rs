//! Decision trees over moderators, the branching-process prior and the
//! ensemble prediction `τ(w) = Σ_m g(w | T_m, M_m)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// `w[var] <= cut` routes left, everything else right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub var: usize,
    pub cut: f64,
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, w: &[f64]) -> bool {
        w[self.var] <= self.cut
    }
}

/// A tree node. Serializes as `{"var", "cut", "left", "right"}` or `{"mu"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Split {
        var: usize,
        cut: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
    Leaf {
        mu: f64,
    },
}

impl Node {
    pub fn leaf(mu: f64) -> Self {
        Node::Leaf { mu }
    }

    pub fn split(rule: SplitRule, left: Node, right: Node) -> Self {
        Node::Split {
            var: rule.var,
            cut: rule.cut,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Leaf { .. })
    }

    pub fn rule(&self) -> Option<SplitRule> {
        match self {
            Node::Split { var, cut, .. } => Some(SplitRule {
                var: *var,
                cut: *cut,
            }),
            Node::Leaf { .. } => None,
        }
    }

    pub fn mu(&self) -> Option<f64> {
        match self {
            Node::Leaf { mu } => Some(*mu),
            Node::Split { .. } => None,
        }
    }

    /// Children of a node whose both children are leaves.
    pub fn leaf_children(&self) -> Option<(f64, f64)> {
        match self {
            Node::Split { left, right, .. } => Some((left.mu()?, right.mu()?)),
            Node::Leaf { .. } => None,
        }
    }
}

/// Address of a node: the sequence of turns from the root (`false` = left).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodePath(pub Vec<bool>);

impl NodePath {
    pub fn root() -> Self {
        Self(Vec::new())
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    pub fn child(&self, right: bool) -> Self {
        let mut p = self.0.clone();
        p.push(right);
        Self(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tree {
    pub root: Node,
}

impl Default for Tree {
    fn default() -> Self {
        Self::root_only(0.0)
    }
}

impl Tree {
    pub fn root_only(mu: f64) -> Self {
        Self {
            root: Node::leaf(mu),
        }
    }

    pub fn get(&self, path: &NodePath) -> &Node {
        let mut node = &self.root;
        for &right in &path.0 {
            node = match node {
                Node::Split { left, right: r, .. } => {
                    if right {
                        r
                    } else {
                        left
                    }
                }
                Node::Leaf { .. } => panic!("path runs past a leaf"),
            };
        }
        node
    }

    pub fn get_mut(&mut self, path: &NodePath) -> &mut Node {
        let mut node = &mut self.root;
        for &right in &path.0 {
            node = match node {
                Node::Split { left, right: r, .. } => {
                    if right {
                        r
                    } else {
                        left
                    }
                }
                Node::Leaf { .. } => panic!("path runs past a leaf"),
            };
        }
        node
    }

    /// Copy of the tree with the node at `path` replaced.
    pub fn with_node(&self, path: &NodePath, node: Node) -> Tree {
        let mut t = self.clone();
        *t.get_mut(path) = node;
        t
    }

    fn walk<'a>(&'a self, mut f: impl FnMut(&NodePath, &'a Node)) {
        fn rec<'a>(n: &'a Node, path: &mut Vec<bool>, f: &mut impl FnMut(&NodePath, &'a Node)) {
            let p = NodePath(path.clone());
            f(&p, n);
            if let Node::Split { left, right, .. } = n {
                path.push(false);
                rec(left, path, f);
                path.pop();
                path.push(true);
                rec(right, path, f);
                path.pop();
            }
        }
        rec(&self.root, &mut Vec::new(), &mut f);
    }

    /// Leaf paths in depth-first, left-first order.
    pub fn leaves(&self) -> Vec<NodePath> {
        let mut out = Vec::new();
        self.walk(|p, n| {
            if n.is_leaf() {
                out.push(p.clone());
            }
        });
        out
    }

    /// Internal nodes whose children are both leaves.
    pub fn nog_nodes(&self) -> Vec<NodePath> {
        let mut out = Vec::new();
        self.walk(|p, n| {
            if n.leaf_children().is_some() {
                out.push(p.clone());
            }
        });
        out
    }

    pub fn leaf_values(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.walk(|_, n| {
            if let Node::Leaf { mu } = n {
                out.push(*mu);
            }
        });
        out
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    pub fn n_nodes(&self) -> usize {
        let mut n = 0;
        self.walk(|_, _| n += 1);
        n
    }

    pub fn depth(&self) -> usize {
        let mut d = 0;
        self.walk(|p, _| d = d.max(p.depth()));
        d
    }

    /// Number of internal nodes splitting on each of `n_vars` moderators.
    pub fn split_counts(&self, n_vars: usize) -> Vec<usize> {
        let mut out = vec![0; n_vars];
        self.walk(|_, n| {
            if let Node::Split { var, .. } = n {
                out[*var] += 1;
            }
        });
        out
    }

    /// Leaf value reached by `w`.
    pub fn predict(&self, w: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { mu } => return *mu,
                Node::Split {
                    var,
                    cut,
                    left,
                    right,
                } => node = if w[*var] <= *cut { left } else { right },
            }
        }
    }

    /// Whether `w` passes through the node at `path`.
    pub fn reaches(&self, path: &NodePath, w: &[f64]) -> bool {
        let mut node = &self.root;
        for &turn in &path.0 {
            match node {
                Node::Split {
                    var,
                    cut,
                    left,
                    right,
                } => {
                    let goes_right = w[*var] > *cut;
                    if goes_right != turn {
                        return false;
                    }
                    node = if turn { right } else { left };
                }
                Node::Leaf { .. } => return false,
            }
        }
        true
    }

    /// Indices (into `moderators`) of the rows passing through `path`.
    pub fn members(&self, path: &NodePath, moderators: &[Vec<f64>]) -> Vec<usize> {
        (0..moderators.len())
            .filter(|&i| self.reaches(path, &moderators[i]))
            .collect()
    }

    /// Row indices grouped by leaf, leaves in [`Tree::leaves`] order.
    pub fn partition(&self, moderators: &[Vec<f64>]) -> Vec<Vec<usize>> {
        fn count(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => count(left) + count(right),
            }
        }
        fn index(n: &Node, w: &[f64]) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split {
                    var,
                    cut,
                    left,
                    right,
                } => {
                    if w[*var] <= *cut {
                        index(left, w)
                    } else {
                        count(left) + index(right, w)
                    }
                }
            }
        }
        let mut out = vec![Vec::new(); count(&self.root)];
        for (i, w) in moderators.iter().enumerate() {
            out[index(&self.root, w)].push(i);
        }
        out
    }
}

/// Probability that a node at `depth` splits: `γ (1 + d)^(−ξ)`.
pub fn split_prob(depth: usize, gamma: f64, xi: f64) -> f64 {
    gamma * (1.0 + depth as f64).powf(-xi)
}

/// Hyperparameters of the tree prior shared by every tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePrior {
    pub gamma: f64,
    pub xi: f64,
    /// Split probabilities over moderators, summing to one.
    pub s: Vec<f64>,
}

impl TreePrior {
    pub fn new(gamma: f64, xi: f64, n_vars: usize) -> Self {
        Self {
            gamma,
            xi,
            s: vec![1.0 / n_vars.max(1) as f64; n_vars],
        }
    }

    pub fn split_prob(&self, depth: usize) -> f64 {
        split_prob(depth, self.gamma, self.xi)
    }

    /// Log prior of a leaf at `depth` holding `rows`. A leaf whose rows
    /// admit no split is a leaf with probability one.
    pub fn leaf_log_prior(&self, depth: usize, rows: &[&[f64]]) -> f64 {
        if available_vars(rows).is_empty() {
            0.0
        } else {
            (1.0 - self.split_prob(depth)).ln()
        }
    }

    /// Log prior of an internal node at `depth` with `rule` over `rows`.
    pub fn split_log_prior(&self, depth: usize, rule: SplitRule, rows: &[&[f64]]) -> f64 {
        self.split_prob(depth).ln() + rule_log_prob(rows, &self.s, rule)
    }
}

/// Ensemble state: trees plus the hyperparameters of their prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub trees: Vec<Tree>,
    pub prior: TreePrior,
    /// Dirichlet concentration on `prior.s`.
    pub a: f64,
    pub sigma_mu: f64,
    /// Half-Cauchy scale constant: `σ_μ ~ C⁺(0, k/√M)`.
    pub k: f64,
}

impl ForestParams {
    pub fn new(n_trees: usize, n_vars: usize, gamma: f64, xi: f64, k: f64) -> Self {
        assert!(n_trees >= 1, "a forest needs at least one tree");
        let sigma_mu = k / (n_trees as f64).sqrt();
        Self {
            trees: vec![Tree::default(); n_trees],
            prior: TreePrior::new(gamma, xi, n_vars),
            a: n_vars as f64,
            sigma_mu,
            k,
        }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn split_counts(&self) -> Vec<usize> {
        let p = self.prior.s.len();
        self.trees.iter().fold(vec![0; p], |mut acc, t| {
            for (a, c) in acc.iter_mut().zip(t.split_counts(p)) {
                *a += c;
            }
            acc
        })
    }

    pub fn leaf_values(&self) -> Vec<f64> {
        self.trees.iter().flat_map(Tree::leaf_values).collect()
    }
}

/// `Σ_m g(w | T_m)`.
pub fn forest_predict(trees: &[Tree], w: &[f64]) -> f64 {
    trees.iter().map(|t| t.predict(w)).sum()
}

/// Moderators with at least two distinct values among `rows`.
pub fn available_vars(rows: &[&[f64]]) -> Vec<usize> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    (0..first.len())
        .filter(|&j| rows.iter().any(|r| r[j] != first[j]))
        .collect()
}

/// Distinct values of `var` among `rows` in increasing order, without the
/// maximum, so that both sides of any cut are nonempty.
pub fn cut_points(rows: &[&[f64]], var: usize) -> Vec<f64> {
    let mut v: Vec<f64> = rows.iter().map(|r| r[var]).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.pop();
    v
}

/// Log probability that [`sample_split_rule`] returns `rule` for `rows`;
/// `−∞` when the rule is not one it can produce.
pub fn rule_log_prob(rows: &[&[f64]], s: &[f64], rule: SplitRule) -> f64 {
    let avail = available_vars(rows);
    if !avail.contains(&rule.var) {
        return f64::NEG_INFINITY;
    }
    let mass: f64 = avail.iter().map(|&j| s[j]).sum();
    let cuts = cut_points(rows, rule.var);
    if !cuts.contains(&rule.cut) || mass <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (s[rule.var] / mass).ln() - (cuts.len() as f64).ln()
}

/// Draws a splitting moderator (with probability proportional to `s` among
/// moderators that vary at the node) and a cut-point uniformly among the
/// node's observed values except the largest. `None` when nothing varies.
pub fn sample_split_rule<R: Rng + ?Sized>(
    rows: &[&[f64]],
    s: &[f64],
    rng: &mut R,
) -> Option<SplitRule> {
    let avail = available_vars(rows);
    let mass: f64 = avail.iter().map(|&j| s[j]).sum();
    if avail.is_empty() || mass <= 0.0 {
        return None;
    }
    let mut u = rng.random::<f64>() * mass;
    let mut var = *avail.last().unwrap();
    for &j in &avail {
        if u < s[j] {
            var = j;
            break;
        }
        u -= s[j];
    }
    let cuts = cut_points(rows, var);
    let cut = cuts[rng.random_range(0..cuts.len())];
    Some(SplitRule { var, cut })
}

/// Log structure prior of a tree given the moderator rows it is fitted to:
/// `log ρ_d + log P(rule)` at internal nodes and `log(1 − ρ_d)` at leaves
/// that could still split.
pub fn tree_log_prior(tree: &Tree, prior: &TreePrior, observed_w: &[Vec<f64>]) -> f64 {
    fn rec(node: &Node, depth: usize, rows: Vec<&[f64]>, prior: &TreePrior) -> f64 {
        match node {
            Node::Leaf { .. } => prior.leaf_log_prior(depth, &rows),
            Node::Split {
                var,
                cut,
                left,
                right,
            } => {
                let rule = SplitRule {
                    var: *var,
                    cut: *cut,
                };
                let here = prior.split_log_prior(depth, rule, &rows);
                let (l, r): (Vec<&[f64]>, Vec<&[f64]>) =
                    rows.into_iter().partition(|w| rule.goes_left(w));
                here + rec(left, depth + 1, l, prior) + rec(right, depth + 1, r, prior)
            }
        }
    }
    let rows: Vec<&[f64]> = observed_w.iter().map(Vec::as_slice).collect();
    rec(&tree.root, 0, rows, prior)
}

//! The branching-process tree prior: split probabilities by depth and the
//! log prior of a few trees over observed moderators.
//!
//!     cargo run --example tree_prior

use clbart::forest::{split_prob, tree_log_prior, Node, SplitRule, Tree, TreePrior};

fn main() {
    for d in 0..4 {
        println!("P(split at depth {d}) = {:.6}", split_prob(d, 0.95, 2.0));
    }
    let w: Vec<Vec<f64>> = (0..8).map(|i| vec![(i % 2) as f64, (i / 2) as f64]).collect();
    let prior = TreePrior::new(0.95, 2.0, 2);
    let rule = |var, cut| SplitRule { var, cut };
    let trees = [
        ("root only", Tree::root_only(0.0)),
        (
            "split on w_1",
            Tree {
                root: Node::split(rule(0, 0.0), Node::leaf(0.0), Node::leaf(0.0)),
            },
        ),
        (
            "split on w_2 <= 1",
            Tree {
                root: Node::split(rule(1, 1.0), Node::leaf(0.0), Node::leaf(0.0)),
            },
        ),
        (
            "w_1 then w_2",
            Tree {
                root: Node::split(
                    rule(0, 0.0),
                    Node::split(rule(1, 1.0), Node::leaf(0.0), Node::leaf(0.0)),
                    Node::leaf(0.0),
                ),
            },
        ),
    ];
    println!();
    for (name, t) in &trees {
        println!("{name:<18} log prior {:>9.4}", tree_log_prior(t, &prior, &w));
    }
}

//! Property tests of the model's structural invariants.

mod common;

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use clbart::clr::{stratum_loglik, stratum_score_fisher, LinearPredictorParts};
use clbart::forest::{forest_predict, split_prob, Node, NodePath, SplitRule, Tree, TreePrior};
use clbart::forest::{rule_log_prob, tree_log_prior};
use clbart::moves::{accept_ratio, MoveContext, MoveKind, MoveProbabilities};
use clbart::posterior::{average_effect, cart_summary, individual_effects, summarize, Scale};
use clbart::sampler::{compute_waic, run_chain, Draw, SamplerConfig};
use clbart::simbench::{aggregate, eval_metrics, mc_stat, Estimator, IntervalEstimate, Metrics, ReplicateRecord, Scenario};
use clbart::strata::{
    build_time_stratified_windows, ingest_reader, CaseEvent, ColumnNames, ModeratorKind, Observation, Schema, StrataError,
};
use clbart::updates::update_split_probs;
use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per stratum: (rows, number of case rows, whether the moderator varies).
fn file_layout() -> impl Strategy<Value = Vec<(usize, usize, bool)>> {
    prop::collection::vec((1usize..6, 0usize..3, prop::bool::weighted(0.15)), 1..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ingested_strata_satisfy_invariants(layout in file_layout(), seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let mut text = String::from("stratum_id,case,z,x_1,w_1\n");
        let mut expect_ok = true;
        for (k, &(rows, cases, varies)) in layout.iter().enumerate() {
            let cases = cases.min(rows);
            expect_ok &= cases == 1 && rows >= 2 && !(varies && rows >= 2);
            let w0 = rng.random_range(0..3);
            for t in 0..rows {
                let w = if varies && t == 1 { w0 + 1 } else { w0 };
                let z: f64 = rng.random_range(-1.0..1.0);
                text.push_str(&format!("S{k},{},{z},{},{w}\n", u8::from(t < cases), rng.random::<f64>()));
            }
        }
        match ingest_reader(text.as_bytes(), &Schema::default()) {
            Ok(d) => {
                prop_assert!(expect_ok);
                prop_assert_eq!(d.len(), layout.len());
                for (s, &(rows, _, _)) in d.strata.iter().zip(&layout) {
                    prop_assert_eq!(s.n_rows(), rows);
                    prop_assert!(s.n_rows() >= 2);
                    prop_assert!(s.case_index() < s.n_rows());
                    prop_assert_eq!(s.moderators().len(), 1);
                }
            }
            Err(e) => {
                prop_assert!(!expect_ok, "unexpected error {e}");
                let known = matches!(
                    e,
                    StrataError::MalformedStratum { .. } | StrataError::TooFewRows { .. } | StrataError::DesignViolation { .. }
                );
                prop_assert!(known, "{e}");
            }
        }
    }

    #[test]
    fn windows_ignore_event_order(seed in any::<u64>(), n in 1usize..12) {
        let mut rng = rng_from(seed);
        let start = NaiveDate::from_ymd_opt(2005, 1, 1).unwrap();
        let series: BTreeMap<NaiveDate, Observation> = (0..800)
            .map(|d| (start + Duration::days(d), Observation { z: rng.random(), x: vec![rng.random()] }))
            .collect();
        let events: Vec<CaseEvent> = (0..n)
            .map(|i| CaseEvent {
                id: format!("e{i}"),
                date: start + Duration::days(rng.random_range(0..700)),
                moderators: vec![f64::from(rng.random_bool(0.5))],
                series: series.clone(),
            })
            .collect();
        let names = ColumnNames { confounders: vec!["x_1".into()], moderators: vec!["w_1".into()] };
        let mut shuffled = events.clone();
        shuffled.reverse();
        shuffled.rotate_left(n / 2);
        let key = |d: clbart::strata::Dataset| {
            let mut v = d.strata;
            v.sort_by(|a, b| a.id().cmp(b.id()));
            v
        };
        let a = key(build_time_stratified_windows(&events, &names).unwrap());
        let b = key(build_time_stratified_windows(&shuffled, &names).unwrap());
        prop_assert_eq!(&a, &b);
        for s in &a {
            prop_assert!(s.n_rows() == 4 || s.n_rows() == 5);
        }
    }

    #[test]
    fn stable_loglik_matches_naive(seed in any::<u64>(), rows in 2usize..6, q in 0usize..4) {
        let mut rng = rng_from(seed);
        let s = random_stratum(&mut rng, 0, rows, q, vec![]);
        let beta: Vec<f64> = (0..q).map(|_| rng.random_range(-3.0..3.0)).collect();
        let tau = rng.random_range(-3.0..3.0);
        // Unstabilized evaluation is safe at these magnitudes.
        let eta: Vec<f64> = (0..rows).map(|t| tau * s.exposure()[t] + dot(s.confounders(t), &beta)).collect();
        let direct = eta[s.case_index()] - eta.iter().map(|e| e.exp()).sum::<f64>().ln();
        let got = stratum_loglik(&s, &beta, tau);
        prop_assert!((got - direct).abs() <= 1e-10 * direct.abs().max(1.0), "{got} vs {direct}");
    }

    #[test]
    fn loglik_is_concave_in_tau(seed in any::<u64>(), rows in 2usize..6, a in -5.0f64..5.0, gap in 0.001f64..3.0) {
        let mut rng = rng_from(seed);
        let s = random_stratum(&mut rng, 0, rows, 1, vec![]);
        let beta = [rng.random_range(-2.0..2.0)];
        let f = |t: f64| stratum_loglik(&s, &beta, t);
        let second = f(a - gap) - 2.0 * f(a) + f(a + gap);
        prop_assert!(second <= 1e-12, "second difference {second}");
    }

    #[test]
    fn loglik_invariant_to_common_shift(seed in any::<u64>(), rows in 2usize..6, c in -20.0f64..20.0) {
        let mut rng = rng_from(seed);
        let s = random_stratum(&mut rng, 0, rows, 1, vec![]);
        let tau = rng.random_range(-2.0..2.0);
        let beta = [rng.random_range(-2.0..2.0)];
        // A constant confounder with coefficient c adds c to every row.
        let data = (0..rows).map(|t| (s.exposure()[t], vec![s.confounders(t)[0], 1.0])).collect();
        let shifted = clbart::strata::Stratum::new("s", s.case_index(), data, vec![]).unwrap();
        let a = stratum_loglik(&s, &beta, tau);
        let b = stratum_loglik(&shifted, &[beta[0], c], tau);
        prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn score_and_information_match_differences(seed in any::<u64>(), rows in 2usize..6) {
        let mut rng = rng_from(seed);
        let s = random_stratum(&mut rng, 0, rows, 2, vec![]);
        let beta = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
        let tau = rng.random_range(-2.0..2.0);
        let (u, info) = stratum_score_fisher(&s, &beta, tau);
        let f = |t: f64| stratum_loglik(&s, &beta, t);
        let h = 1e-5;
        let fd_u = (f(tau + h) - f(tau - h)) / (2.0 * h);
        let fd_i = -(stratum_score_fisher(&s, &beta, tau + h).0 - stratum_score_fisher(&s, &beta, tau - h).0) / (2.0 * h);
        prop_assert!((fd_u - u).abs() <= 1e-6 * u.abs().max(1e-3), "score {u} vs {fd_u}");
        prop_assert!((fd_i - info).abs() <= 1e-6 * info.abs().max(1e-3), "info {info} vs {fd_i}");
        prop_assert!(info >= 0.0);
    }
}

fn random_tree<R: Rng>(rng: &mut R, depth: usize, p: usize, max_depth: usize) -> Node {
    if depth >= max_depth || rng.random_bool(0.35) {
        Node::leaf(rng.random_range(-1.0..1.0))
    } else {
        Node::split(
            SplitRule {
                var: rng.random_range(0..p),
                cut: f64::from(rng.random_range(0..3u8)),
            },
            random_tree(rng, depth + 1, p, max_depth),
            random_tree(rng, depth + 1, p, max_depth),
        )
    }
}

fn random_moderators<R: Rng>(rng: &mut R, n: usize, p: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..p).map(|_| f64::from(rng.random_range(0..4u8))).collect())
        .collect()
}

/// Structure prior by direct recursion: ρ_d = γ(1 + d)^-ξ, a leaf that
/// cannot split contributes nothing, the rule probability is s restricted
/// to varying moderators times one over the number of admissible cuts.
fn reference_prior(node: &Node, depth: usize, rows: &[Vec<f64>], gamma: f64, xi: f64, s: &[f64]) -> f64 {
    let rho = gamma * (1.0 + depth as f64).powf(-xi);
    let varying: Vec<usize> = (0..s.len())
        .filter(|&j| rows.iter().any(|r| r[j] != rows[0][j]))
        .collect();
    match node {
        Node::Leaf { .. } => {
            if varying.is_empty() {
                0.0
            } else {
                (1.0 - rho).ln()
            }
        }
        Node::Split { var, cut, left, right } => {
            let mut values: Vec<f64> = rows.iter().map(|r| r[*var]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            let admissible = values.len().saturating_sub(1);
            let mass: f64 = varying.iter().map(|&j| s[j]).sum();
            let rule = if varying.contains(var) && values[..admissible].contains(cut) {
                (s[*var] / mass).ln() - (admissible as f64).ln()
            } else {
                f64::NEG_INFINITY
            };
            let (l, r): (Vec<Vec<f64>>, Vec<Vec<f64>>) = rows.iter().cloned().partition(|w| w[*var] <= *cut);
            rho.ln() + rule + reference_prior(left, depth + 1, &l, gamma, xi, s) + reference_prior(right, depth + 1, &r, gamma, xi, s)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn routing_partitions_the_strata(seed in any::<u64>(), n in 1usize..40, p in 1usize..4) {
        let mut rng = rng_from(seed);
        let tree = Tree { root: random_tree(&mut rng, 0, p, 4) };
        let w = random_moderators(&mut rng, n, p);
        let groups = tree.partition(&w);
        let leaves = tree.leaves();
        prop_assert_eq!(groups.len(), leaves.len());
        let mut all: Vec<usize> = groups.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        for (path, members) in leaves.iter().zip(&groups) {
            let mu = tree.get(path).mu().unwrap();
            for &i in members {
                prop_assert_eq!(tree.predict(&w[i]), mu);
            }
        }
    }

    #[test]
    fn prediction_ignores_tree_order(seed in any::<u64>(), m in 1usize..6) {
        let mut rng = rng_from(seed);
        let mut forest: Vec<Tree> = (0..m).map(|_| Tree { root: random_tree(&mut rng, 0, 3, 3) }).collect();
        let w = random_moderators(&mut rng, 10, 3);
        let before: Vec<f64> = w.iter().map(|wi| forest_predict(&forest, wi)).collect();
        forest.reverse();
        forest.rotate_left(m / 2);
        for (wi, b) in w.iter().zip(&before) {
            prop_assert!((forest_predict(&forest, wi) - b).abs() < 1e-12);
            let single: f64 = forest.iter().map(|t| t.predict(wi)).sum();
            prop_assert!((single - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tree_prior_matches_reference(seed in any::<u64>(), n in 2usize..30, p in 1usize..4) {
        let mut rng = rng_from(seed);
        let w = random_moderators(&mut rng, n, p);
        let raw: Vec<f64> = (0..p).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let prior = TreePrior { gamma: 0.95, xi: 2.0, s: raw.iter().map(|v| v / total).collect() };
        let tree = Tree { root: random_tree(&mut rng, 0, p, 3) };
        let got = tree_log_prior(&tree, &prior, &w);
        let want = reference_prior(&tree.root, 0, &w, prior.gamma, prior.xi, &prior.s);
        if want.is_finite() {
            prop_assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        } else {
            prop_assert_eq!(got, f64::NEG_INFINITY);
        }
    }

    #[test]
    fn split_probabilities_sum_to_one(seed in any::<u64>(), a in 0.01f64..50.0, counts in prop::collection::vec(0usize..30, 1..12)) {
        let mut rng = rng_from(seed);
        let s = update_split_probs(a, &counts, &mut rng);
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(s.iter().all(|&v| v > 0.0));
    }
}

/// A depth-2 tree on two continuous moderators plus the fitting context.
struct LocalityFixture {
    strata: Vec<clbart::strata::Stratum>,
    w: Vec<Vec<f64>>,
    offsets: Vec<f64>,
    current: Tree,
    grown: Tree,
}

fn locality_fixture(seed: u64, offset_scale: f64) -> LocalityFixture {
    let mut rng = rng_from(seed);
    let n = 24;
    let mut w: Vec<Vec<f64>> = (0..n)
        .map(|i| vec![(i % 2) as f64, f64::from(rng.random_range(0..4u8))])
        .collect();
    // keep `w_2 <= 1` a node-local cut of the left leaf
    w[0][1] = 1.0;
    w[2][1] = 3.0;
    let strata = (0..n)
        .map(|i| model_stratum(&mut rng, i, 4, &[0.3], 0.5, w[i].clone()))
        .collect();
    let offsets = (0..n).map(|_| rng.random_range(-offset_scale..offset_scale)).collect();
    let current = Tree {
        root: Node::split(SplitRule { var: 0, cut: 0.0 }, Node::leaf(0.1), Node::leaf(-0.2)),
    };
    // Grow the left leaf (w_1 = 0) on w_2.
    let grown = current.with_node(
        &NodePath(vec![false]),
        Node::split(SplitRule { var: 1, cut: 1.0 }, Node::leaf(0.3), Node::leaf(-0.1)),
    );
    LocalityFixture {
        strata,
        w,
        offsets,
        current,
        grown,
    }
}

fn grow_ratio(f: &LocalityFixture) -> f64 {
    let beta = [0.3];
    let parts: Vec<LinearPredictorParts> = f.strata.iter().map(|s| LinearPredictorParts::new(s, &beta)).collect();
    let prior = TreePrior::new(0.95, 2.0, 2);
    let ctx = MoveContext {
        parts: &parts,
        moderators: &f.w,
        offsets: &f.offsets,
        prior: &prior,
        sigma_mu: 0.5,
        probs: MoveProbabilities::default(),
    };
    accept_ratio(MoveKind::Grow, &f.current, &f.grown, &NodePath(vec![false]), &ctx)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn accept_ratio_depends_only_on_affected_leaf(seed in any::<u64>(), other in any::<u64>()) {
        let base = locality_fixture(seed, 1.0);
        let r0 = grow_ratio(&base);
        prop_assert!(r0.is_finite());
        // Replace every stratum routed right (w_1 = 1) and its offset.
        let mut rng = rng_from(other);
        let mut perturbed = locality_fixture(seed, 1.0);
        for i in (0..perturbed.strata.len()).filter(|&i| perturbed.w[i][0] == 1.0) {
            let rows = rng.random_range(2..6);
            perturbed.strata[i] = random_stratum(&mut rng, i, rows, 1, perturbed.w[i].clone());
            perturbed.offsets[i] = rng.random_range(-5.0..5.0);
        }
        prop_assert_eq!(grow_ratio(&perturbed), r0);
    }

    #[test]
    fn accept_ratio_stable_for_large_offsets(seed in any::<u64>()) {
        let f = locality_fixture(seed, 50.0);
        let r = grow_ratio(&f);
        prop_assert!(!r.is_nan() && r != f64::INFINITY, "{r}");
    }
}

fn tiny_dataset(seed: u64) -> clbart::strata::Dataset {
    let mut rng = rng_from(seed);
    let strata = (0..12)
        .map(|i| {
            let w = vec![(i % 2) as f64, f64::from(rng.random_range(0..3u8))];
            model_stratum(&mut rng, i, 4, &[0.2], 0.4, w)
        })
        .collect();
    dataset(strata, 2, ModeratorKind::Continuous, 1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kept_draw_count(
        (iterations, burn) in (1usize..80).prop_flat_map(|n| (Just(n), 0..n)),
        thin in 1usize..9,
    ) {
        let cfg = SamplerConfig { n_trees: 2, iterations, burn_in: burn, thin, ..SamplerConfig::default() };
        let post = run_chain(&tiny_dataset(3), &cfg).unwrap();
        prop_assert_eq!(post.draws.len(), (iterations - burn) / thin);
        prop_assert_eq!(cfg.kept_draws(), (iterations - burn) / thin);
        for d in &post.draws {
            prop_assert!(d.iteration >= burn);
        }
    }
}

fn random_draws<R: Rng>(rng: &mut R, s: usize, n: usize) -> Vec<Draw> {
    (0..s)
        .map(|it| Draw {
            iteration: it,
            beta: vec![],
            tau: (0..n).map(|_| rng.random_range(-1.5..1.5)).collect(),
            sigma_mu: 1.0,
            concentration: 1.0,
            split_probs: vec![1.0],
            node_counts: vec![1],
            split_counts: vec![0],
            loglik: (0..n).map(|_| -rng.random::<f64>()).collect(),
            total_loglik: 0.0,
            forest: vec![],
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn odds_ratio_summaries_are_per_draw(seed in any::<u64>(), s in 1usize..60, n in 1usize..20) {
        let mut rng = rng_from(seed);
        let draws = random_draws(&mut rng, s, n);
        let or = average_effect(&draws, Scale::OddsRatio, 0.9).unwrap();
        let per_draw: Vec<f64> = draws.iter().map(|d| d.mean_tau().exp()).collect();
        let direct = summarize(&per_draw, 0.9);
        prop_assert!((or.mean - direct.mean).abs() < 1e-12);
        prop_assert_eq!(or.lower, direct.lower);
        prop_assert_eq!(or.upper, direct.upper);
        // τ̄ is the mean of the individual posterior means.
        let avg = average_effect(&draws, Scale::Log, 0.9).unwrap();
        let ind = individual_effects(&draws, Scale::Log, 0.9).unwrap();
        let m = ind.iter().map(|e| e.mean).sum::<f64>() / n as f64;
        prop_assert!((avg.mean - m).abs() < 1e-12);
    }

    #[test]
    fn summary_intervals_are_ordered_draw_values(
        values in proptest::collection::vec(-1e3f64..1e3, 1..80),
        level in 0.01f64..0.99,
    ) {
        let s = summarize(&values, level);
        prop_assert!(s.lower <= s.upper);
        prop_assert!(values.contains(&s.lower) && values.contains(&s.upper));
        let wider = summarize(&values, (level + 1.0) / 2.0);
        prop_assert!(wider.lower <= s.lower && s.upper <= wider.upper);
    }

    #[test]
    fn waic_of_repeated_draws_is_single_draw_waic(seed in any::<u64>(), n in 1usize..10, reps in 2usize..5) {
        let mut rng = rng_from(seed);
        let row: Vec<f64> = (0..n).map(|_| -rng.random::<f64>() * 5.0).collect();
        let one = compute_waic(std::slice::from_ref(&row));
        let many = compute_waic(&vec![row.clone(); reps]);
        prop_assert!((one.waic - many.waic).abs() < 1e-12);
        prop_assert!(many.p_waic.abs() < 1e-12);
        prop_assert!((one.waic + 2.0 * row.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn cart_summary_is_deterministic_and_bounded(seed in any::<u64>(), n in 2usize..60) {
        let mut rng = rng_from(seed);
        let w = random_moderators(&mut rng, n, 3);
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let a = cart_summary(&y, &w, &[0, 1, 2], 3, 2);
        let b = cart_summary(&y, &w, &[2, 1, 0], 3, 2);
        prop_assert_eq!(&a, &b);
        prop_assert!(a.summary_r2 <= 1.0 + 1e-12 && a.summary_r2 >= -1e-12);
        prop_assert_eq!(a.leaves.iter().map(|l| l.n).sum::<usize>(), n);
        // With a single split, a larger minimum leaf can only lose fit.
        let mut last = f64::INFINITY;
        for min_leaf in 1..=n {
            let r2 = cart_summary(&y, &w, &[0, 1, 2], 1, min_leaf).summary_r2;
            prop_assert!(r2 <= last + 1e-12);
            last = r2;
        }
    }

    #[test]
    fn cart_ties_prefer_lowest_variable(seed in any::<u64>(), n in 4usize..40) {
        let mut rng = rng_from(seed);
        // Moderators 1 and 2 are copies of each other.
        let w: Vec<Vec<f64>> = (0..n).map(|_| {
            let v = f64::from(rng.random_range(0..3u8));
            vec![rng.random::<f64>(), v, v]
        }).collect();
        let y: Vec<f64> = w.iter().map(|r| r[1] + 0.01 * rng.random::<f64>()).collect();
        let c = cart_summary(&y, &w, &[1, 2], 1, 1);
        if let Some(rule) = c.tree.root.rule() {
            prop_assert_eq!(rule.var, 1);
        }
    }

    #[test]
    fn metrics_of_truth_are_exact(seed in any::<u64>(), n in 1usize..50) {
        let mut rng = rng_from(seed);
        let truth: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let est: Vec<IntervalEstimate> = truth.iter().map(|&t| IntervalEstimate { mean: t, lower: t, upper: t }).collect();
        prop_assert_eq!(eval_metrics(&est, &truth), Metrics { bias: 0.0, rmse: 0.0, coverage: 1.0, width: 0.0 });
    }

    #[test]
    fn aggregate_matches_recomputation(seed in any::<u64>(), reps in 1usize..8) {
        let mut rng = rng_from(seed);
        let mut records = Vec::new();
        for r in 0..reps {
            for (estimator, trees) in [(Estimator::Oracle, None), (Estimator::Clbart, Some(5))] {
                records.push(ReplicateRecord {
                    scenario: Scenario::Cart,
                    estimator,
                    trees,
                    replicate: r,
                    seed: 0,
                    n_cases: 10,
                    metrics: Metrics {
                        bias: rng.random_range(-0.1..0.1),
                        rmse: rng.random(),
                        coverage: rng.random(),
                        width: rng.random(),
                    },
                    beta_bias: vec![],
                    beta_covered: vec![],
                    waic: None,
                    variable_importance: None,
                    true_moderators: None,
                    beta_acceptance: None,
                });
            }
        }
        let rows = aggregate(&records);
        prop_assert_eq!(rows.len(), 2);
        for row in &rows {
            let bias: Vec<f64> = records
                .iter()
                .filter(|r| r.estimator == row.estimator)
                .map(|r| r.metrics.bias)
                .collect();
            let k = bias.len() as f64;
            let mean = bias.iter().sum::<f64>() / k;
            let se = if bias.len() > 1 {
                (bias.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt()
            } else {
                0.0
            };
            prop_assert_eq!(row.replicates, reps);
            prop_assert!((row.bias.mean - mean).abs() < 1e-14);
            prop_assert!((row.bias.se - se).abs() < 1e-14);
            prop_assert_eq!(mc_stat(&bias), row.bias);
        }
    }
}

#[test]
fn two_tree_shapes_exhaust_the_prior() {
    // One binary moderator: the root either stays a leaf or splits once,
    // after which neither child can split.
    let w = vec![vec![0.0], vec![1.0], vec![1.0]];
    let prior = TreePrior::new(0.95, 2.0, 1);
    let root = Tree::root_only(0.0);
    let split = Tree {
        root: Node::split(SplitRule { var: 0, cut: 0.0 }, Node::leaf(0.0), Node::leaf(0.0)),
    };
    let rows: Vec<&[f64]> = w.iter().map(Vec::as_slice).collect();
    assert_eq!(rule_log_prob(&rows, &prior.s, SplitRule { var: 0, cut: 0.0 }), 0.0);
    let total = tree_log_prior(&root, &prior, &w).exp() + tree_log_prior(&split, &prior, &w).exp();
    assert!((total - 1.0).abs() < 1e-15);
    assert!((split_prob(0, 0.95, 2.0) - 0.95).abs() < 1e-15);
}


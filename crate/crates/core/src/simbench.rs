//! Simulation benchmark: a cohort followed daily under a shared exposure
//! series, events drawn from a logistic model with a heterogeneous exposure
//! effect, cases expanded into time-stratified windows, and the CL-BART and
//! oracle fits scored against the truth.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use chrono::{Datelike, Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clr::{clr_fit_design, ClrError, DesignStratum};
use crate::posterior::{individual_effects, summarize, variable_importance, Scale};
use crate::sampler::{compute_waic, run_chain, SamplerConfig, SamplerError};
use crate::strata::{
    build_time_stratified_windows, time_stratified_window, CaseEvent, ColumnNames, Dataset,
    Observation, StrataError,
};

/// Two-sided 95% Normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;
/// Exposure seasonality: three periods over this many days.
pub const EXPOSURE_PERIOD_DAYS: f64 = 1096.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Spec(String),
    #[error("simulated cohort produced no cases")]
    EmptyCohort,
    #[error(transparent)]
    Strata(#[from] StrataError),
    #[error("oracle fit failed: {0}")]
    Oracle(#[from] ClrError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Cart,
    Friedman,
}

impl std::str::FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "cart" => Ok(Scenario::Cart),
            "friedman" => Ok(Scenario::Friedman),
            other => Err(format!("unknown scenario {other:?} (expected cart or friedman)")),
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scenario::Cart => "cart",
            Scenario::Friedman => "friedman",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n_individuals: usize,
    pub horizon_days: usize,
    pub odds_ratios: Vec<f64>,
    pub alpha: f64,
    pub n_moderators: usize,
    /// AR-1 correlation of the latent moderators (CART scenario).
    pub moderator_correlation: f64,
    /// Calendar date of day 1.
    pub start_date: NaiveDate,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            scenario: Scenario::Cart,
            n_individuals: 10_000,
            horizon_days: 1096,
            odds_ratios: vec![0.5, 0.8, 1.0, 1.2, 2.0],
            alpha: -8.0,
            n_moderators: 10,
            moderator_correlation: 0.6,
            start_date: NaiveDate::from_ymd_opt(2005, 1, 1).expect("valid date"),
            seed: 1,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |m: String| Err(SimError::Spec(m));
        if self.horizon_days < 28 {
            return fail("horizon_days must cover at least one calendar month (28 days)".into());
        }
        if self.n_individuals == 0 {
            return fail("n_individuals must be positive".into());
        }
        let needed = match self.scenario {
            Scenario::Cart => 3,
            Scenario::Friedman => 5,
        };
        if self.n_moderators < needed {
            return fail(format!("{} scenario needs at least {needed} moderators", self.scenario));
        }
        if self.odds_ratios.iter().any(|o| !(*o > 0.0)) {
            return fail("odds ratios must be positive".into());
        }
        if !(self.moderator_correlation.abs() < 1.0) {
            return fail("moderator_correlation must lie in (-1, 1)".into());
        }
        Ok(())
    }

    pub fn beta(&self) -> Vec<f64> {
        self.odds_ratios.iter().map(|o| o.ln()).collect()
    }
}

/// Mixes a base seed with a tag (SplitMix64 finalizer) for independent
/// replicate and worker streams.
pub fn derive_seed(base: u64, tag: u64) -> u64 {
    let mut z = base ^ tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean of the exposure on day `t` (1-based).
pub fn exposure_mean(t: f64) -> f64 {
    (2.0 * PI * t * 3.0 / EXPOSURE_PERIOD_DAYS).sin()
}

/// Shared exposure series Z_t ~ N(mean(t), 1), t = 1..=horizon.
pub fn gen_exposure<R: Rng + ?Sized>(horizon: usize, rng: &mut R) -> Vec<f64> {
    (1..=horizon)
        .map(|t| {
            let e: f64 = StandardNormal.sample(rng);
            exposure_mean(t as f64) + e
        })
        .collect()
}

/// Fixed effect-moderation surface of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EffectSurface {
    /// Depth-2 tree on three binary moderators `vars = (w₁′, w₂′, w₃′)`.
    Cart { vars: [usize; 3] },
    Friedman,
}

pub const CART_LEAF_ODDS_RATIOS: [f64; 4] = [0.8, 1.1, 1.3, 1.5];

impl EffectSurface {
    /// Index of the CART leaf w falls in (0..4, left to right).
    pub fn cart_leaf(vars: [usize; 3], w: &[f64]) -> usize {
        if w[vars[0]] <= 0.0 {
            usize::from(w[vars[1]] > 0.0)
        } else {
            2 + usize::from(w[vars[2]] > 0.0)
        }
    }

    pub fn friedman(w: &[f64]) -> f64 {
        10.0 * (PI * w[0] * w[1]).sin() + 20.0 * (w[2] - 0.5).powi(2) + 10.0 * w[3] + 5.0 * w[4]
    }

    pub fn tau(&self, w: &[f64]) -> f64 {
        match self {
            EffectSurface::Cart { vars } => CART_LEAF_ODDS_RATIOS[Self::cart_leaf(*vars, w)].ln(),
            EffectSurface::Friedman => (Self::friedman(w) - 14.0) / 15.0,
        }
    }

    /// Basis b(w) such that τ(w) is linear in b(w): leaf indicators, or the
    /// Friedman terms with an intercept.
    pub fn oracle_basis(&self, w: &[f64]) -> Vec<f64> {
        match self {
            EffectSurface::Cart { vars } => {
                let mut b = vec![0.0; 4];
                b[Self::cart_leaf(*vars, w)] = 1.0;
                b
            }
            EffectSurface::Friedman => vec![
                1.0,
                (PI * w[0] * w[1]).sin(),
                (w[2] - 0.5).powi(2),
                w[3],
                w[4],
            ],
        }
    }
}

/// Chooses the surface for a replicate (the three CART moderators are drawn
/// without replacement, in order).
pub fn gen_surface<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> EffectSurface {
    match spec.scenario {
        Scenario::Cart => {
            let picked = rand::seq::index::sample(rng, spec.n_moderators, 3);
            EffectSurface::Cart {
                vars: [picked.index(0), picked.index(1), picked.index(2)],
            }
        }
        Scenario::Friedman => EffectSurface::Friedman,
    }
}

/// Latent AR-1 Normal vector with unit marginal variance.
pub fn ar1_latent<R: Rng + ?Sized>(p: usize, rho: f64, rng: &mut R) -> Vec<f64> {
    let innov = (1.0 - rho * rho).sqrt();
    let mut out = Vec::with_capacity(p);
    let mut prev: f64 = StandardNormal.sample(rng);
    out.push(prev);
    for _ in 1..p {
        let e: f64 = StandardNormal.sample(rng);
        prev = rho * prev + innov * e;
        out.push(prev);
    }
    out
}

pub fn gen_moderators<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Vec<f64> {
    match spec.scenario {
        Scenario::Cart => ar1_latent(spec.n_moderators, spec.moderator_correlation, rng)
            .into_iter()
            .map(|l| if l > 0.0 { 1.0 } else { 0.0 })
            .collect(),
        Scenario::Friedman => (0..spec.n_moderators).map(|_| rng.random::<f64>()).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub dataset: Dataset,
    pub surface: EffectSurface,
    /// True τ(w_i) per stratum, in dataset order.
    pub tau: Vec<f64>,
    pub beta: Vec<f64>,
    pub exposure: Vec<f64>,
    /// All events generated, before any were dropped.
    pub n_events: usize,
    /// Repeat events of an individual within a calendar month already holding a case.
    pub n_repeat_discarded: usize,
    /// Events whose referent window runs past the follow-up period.
    pub n_edge_discarded: usize,
}

fn individual_rng(seed: u64, i: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(1 + i as u64);
    r
}

/// Generates one cohort. Each individual draws from its own stream, so the
/// cohort is identical however it is scheduled. Per individual and calendar
/// month only the first event becomes a case.
pub fn simulate_cohort(spec: &ScenarioSpec) -> Result<Cohort, SimError> {
    spec.validate()?;
    let mut master = ChaCha8Rng::seed_from_u64(spec.seed);
    let exposure = gen_exposure(spec.horizon_days, &mut master);
    let surface = gen_surface(spec, &mut master);
    let beta = spec.beta();
    let q = beta.len();
    let h = spec.horizon_days;
    let last_day = spec.start_date + Days::new(h as u64 - 1);
    let date_of = |t: usize| spec.start_date + Days::new(t as u64);
    let index_of = |d: NaiveDate| (d - spec.start_date).num_days();

    let mut events = Vec::new();
    let (mut n_events, mut n_repeat, mut n_edge) = (0, 0, 0);
    let mut x = vec![0.0; h * q];
    for i in 0..spec.n_individuals {
        let mut rng = individual_rng(spec.seed, i);
        let w = gen_moderators(spec, &mut rng);
        let tau = surface.tau(&w);
        let mut hits = Vec::new();
        for t in 0..h {
            let xt = &mut x[t * q..(t + 1) * q];
            for v in xt.iter_mut() {
                *v = rng.random::<f64>();
            }
            let eta = spec.alpha + xt.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + tau * exposure[t];
            if rng.random::<f64>() < expit(eta) {
                hits.push(t);
            }
        }
        n_events += hits.len();
        let mut last_month = None;
        for t in hits {
            let date = date_of(t);
            let month = (date.year(), date.month());
            if last_month == Some(month) {
                n_repeat += 1;
                continue;
            }
            last_month = Some(month);
            let window = time_stratified_window(date);
            if window.iter().any(|&d| d < spec.start_date || d > last_day) {
                n_edge += 1;
                continue;
            }
            let series: BTreeMap<NaiveDate, Observation> = window
                .iter()
                .map(|&d| {
                    let k = index_of(d) as usize;
                    (
                        d,
                        Observation {
                            z: exposure[k],
                            x: x[k * q..(k + 1) * q].to_vec(),
                        },
                    )
                })
                .collect();
            events.push(CaseEvent {
                id: format!("{i:07}-{}-{:02}", month.0, month.1),
                date,
                moderators: w.clone(),
                series,
            });
        }
    }
    if events.is_empty() {
        return Err(SimError::EmptyCohort);
    }
    let names = ColumnNames {
        confounders: (1..=q).map(|j| format!("x_{j}")).collect(),
        moderators: (1..=spec.n_moderators).map(|j| format!("w_{j}")).collect(),
    };
    let dataset = build_time_stratified_windows(&events, &names)?;
    let tau = dataset.strata.iter().map(|s| surface.tau(s.moderators())).collect();
    Ok(Cohort {
        dataset,
        surface,
        tau,
        beta,
        exposure,
        n_events,
        n_repeat_discarded: n_repeat,
        n_edge_discarded: n_edge,
    })
}

/// Point estimate and interval for one τ(w_i).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub bias: f64,
    pub rmse: f64,
    pub coverage: f64,
    pub width: f64,
}

pub fn eval_metrics(estimates: &[IntervalEstimate], truth: &[f64]) -> Metrics {
    let n = truth.len() as f64;
    let mut m = Metrics {
        bias: 0.0,
        rmse: 0.0,
        coverage: 0.0,
        width: 0.0,
    };
    for (e, &t) in estimates.iter().zip(truth) {
        let err = e.mean - t;
        m.bias += err;
        m.rmse += err * err;
        m.coverage += f64::from(u8::from(e.lower <= t && t <= e.upper));
        m.width += e.upper - e.lower;
    }
    m.bias /= n;
    m.rmse = (m.rmse / n).sqrt();
    m.coverage /= n;
    m.width /= n;
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleFit {
    pub coef: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub tau: Vec<IntervalEstimate>,
    pub beta: Vec<IntervalEstimate>,
}

/// Conditional logistic fit on the confounders plus the true effect basis
/// interacted with the exposure, with Wald intervals.
pub fn oracle_fit(cohort: &Cohort) -> Result<OracleFit, SimError> {
    let d = &cohort.dataset;
    let q = d.n_confounders();
    let bases: Vec<Vec<f64>> = d
        .strata
        .iter()
        .map(|s| cohort.surface.oracle_basis(s.moderators()))
        .collect();
    let k = bases.first().map_or(0, Vec::len);
    let n_coef = q + k;
    let design: Vec<DesignStratum> = d
        .strata
        .iter()
        .zip(&bases)
        .map(|(s, b)| {
            let mut values = Vec::with_capacity(s.n_rows() * n_coef);
            for t in 0..s.n_rows() {
                values.extend_from_slice(s.confounders(t));
                values.extend(b.iter().map(|bj| bj * s.exposure()[t]));
            }
            DesignStratum {
                case_index: s.case_index(),
                n_coef,
                values,
            }
        })
        .collect();
    let fit = clr_fit_design(&design, n_coef)?;
    let wald = |mean: f64, var: f64| {
        let half = Z_975 * var.max(0.0).sqrt();
        IntervalEstimate {
            mean,
            lower: mean - half,
            upper: mean + half,
        }
    };
    let tau = bases
        .iter()
        .map(|b| {
            let mean: f64 = b.iter().zip(&fit.beta_hat[q..]).map(|(x, c)| x * c).sum();
            let mut var = 0.0;
            for (a, ba) in b.iter().enumerate() {
                for (c, bc) in b.iter().enumerate() {
                    var += ba * bc * fit.covariance[q + a][q + c];
                }
            }
            wald(mean, var)
        })
        .collect();
    let beta = (0..q)
        .map(|j| wald(fit.beta_hat[j], fit.covariance[j][j]))
        .collect();
    Ok(OracleFit {
        coef: fit.beta_hat,
        covariance: fit.covariance,
        tau,
        beta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Oracle,
    Clbart,
}

/// One row of the benchmark tables: a (scenario, estimator, M, replicate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub scenario: Scenario,
    pub estimator: Estimator,
    pub trees: Option<usize>,
    pub replicate: usize,
    pub seed: u64,
    pub n_cases: usize,
    pub metrics: Metrics,
    pub beta_bias: Vec<f64>,
    pub beta_covered: Vec<bool>,
    pub waic: Option<f64>,
    pub variable_importance: Option<Vec<f64>>,
    /// Moderators that carry the effect (CART scenario).
    pub true_moderators: Option<Vec<usize>>,
    pub beta_acceptance: Option<f64>,
}

fn beta_scores(est: &[IntervalEstimate], truth: &[f64]) -> (Vec<f64>, Vec<bool>) {
    est.iter()
        .zip(truth)
        .map(|(e, &t)| (e.mean - t, e.lower <= t && t <= e.upper))
        .unzip()
}

/// Generates one cohort and scores the oracle plus a CL-BART fit per tree
/// count. The chain seed for each M is derived from the replicate seed.
pub fn run_replicate(
    spec: &ScenarioSpec,
    sampler: &SamplerConfig,
    trees: &[usize],
    replicate: usize,
) -> Result<Vec<ReplicateRecord>, SimError> {
    let cohort = simulate_cohort(spec)?;
    let n_cases = cohort.dataset.len();
    let true_moderators = match &cohort.surface {
        EffectSurface::Cart { vars } => Some(vars.to_vec()),
        EffectSurface::Friedman => None,
    };
    let mut out = Vec::with_capacity(trees.len() + 1);
    let oracle = oracle_fit(&cohort)?;
    let (beta_bias, beta_covered) = beta_scores(&oracle.beta, &cohort.beta);
    out.push(ReplicateRecord {
        scenario: spec.scenario,
        estimator: Estimator::Oracle,
        trees: None,
        replicate,
        seed: spec.seed,
        n_cases,
        metrics: eval_metrics(&oracle.tau, &cohort.tau),
        beta_bias,
        beta_covered,
        waic: None,
        variable_importance: None,
        true_moderators: true_moderators.clone(),
        beta_acceptance: None,
    });
    for &m in trees {
        let cfg = SamplerConfig {
            n_trees: m,
            seed: derive_seed(spec.seed, m as u64),
            keep_forests: false,
            ..sampler.clone()
        };
        let post = run_chain(&cohort.dataset, &cfg)?;
        let level = 0.95;
        let est: Vec<IntervalEstimate> = individual_effects(&post.draws, Scale::Log, level)
            .map_err(|_| SimError::Sampler(SamplerError::Config("no kept draws".into())))?
            .into_iter()
            .map(|s| IntervalEstimate {
                mean: s.mean,
                lower: s.lower,
                upper: s.upper,
            })
            .collect();
        let beta_est: Vec<IntervalEstimate> = (0..cohort.beta.len())
            .map(|j| {
                let v: Vec<f64> = post.draws.iter().map(|d| d.beta[j]).collect();
                let s = summarize(&v, level);
                IntervalEstimate {
                    mean: s.mean,
                    lower: s.lower,
                    upper: s.upper,
                }
            })
            .collect();
        let (beta_bias, beta_covered) = beta_scores(&beta_est, &cohort.beta);
        let vi = variable_importance(&post.draws, level).ok().map(|v| v.mean);
        let b = post.stats.beta;
        out.push(ReplicateRecord {
            scenario: spec.scenario,
            estimator: Estimator::Clbart,
            trees: Some(m),
            replicate,
            seed: cfg.seed,
            n_cases,
            metrics: eval_metrics(&est, &cohort.tau),
            beta_bias,
            beta_covered,
            waic: Some(compute_waic(&post.loglik_matrix()).waic),
            variable_importance: vi,
            true_moderators: true_moderators.clone(),
            beta_acceptance: (b.proposed > 0).then(|| b.accepted as f64 / b.proposed as f64),
        });
    }
    Ok(out)
}

/// Monte Carlo mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McStat {
    pub mean: f64,
    pub se: f64,
}

pub fn mc_stat(values: &[f64]) -> McStat {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let se = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    McStat { mean, se }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scenario: Scenario,
    pub estimator: Estimator,
    pub trees: Option<usize>,
    pub replicates: usize,
    pub bias: McStat,
    pub rmse: McStat,
    pub coverage: McStat,
    pub width: McStat,
}

/// Table rows grouped by (scenario, estimator, M), oracle first.
pub fn aggregate(records: &[ReplicateRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(Scenario, Estimator, Option<usize>), Vec<&ReplicateRecord>> =
        BTreeMap::new();
    for r in records {
        groups
            .entry((r.scenario, r.estimator, r.trees))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((scenario, estimator, trees), rs)| {
            let col = |f: fn(&Metrics) -> f64| {
                mc_stat(&rs.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>())
            };
            AggregateRow {
                scenario,
                estimator,
                trees,
                replicates: rs.len(),
                bias: col(|m| m.bias),
                rmse: col(|m| m.rmse),
                coverage: col(|m| m.coverage),
                width: col(|m| m.width),
            }
        })
        .collect()
}

pub fn format_aggregate(rows: &[AggregateRow]) -> String {
    let mut s = String::from("scenario  type    M    reps  bias             rmse             coverage         width\n");
    for r in rows {
        let cell = |m: McStat| format!("{:.3} ({:.3})", m.mean, m.se);
        s.push_str(&format!(
            "{:<9} {:<7} {:<4} {:<5} {:<16} {:<16} {:<16} {}\n",
            r.scenario.to_string(),
            match r.estimator {
                Estimator::Oracle => "oracle",
                Estimator::Clbart => "clbart",
            },
            r.trees.map_or(String::new(), |m| m.to_string()),
            r.replicates,
            cell(r.bias),
            cell(r.rmse),
            cell(r.coverage),
            cell(r.width),
        ));
    }
    s
}

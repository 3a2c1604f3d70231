//! Gibbs and Metropolis–Hastings updates for everything except tree
//! structure: leaf refresh by adaptive rejection sampling, the leaf scale
//! σ_μ, the split probabilities `s`, their concentration `a`, and the
//! confounder coefficients β.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::clr::LinearPredictorParts;
use crate::forest::{Node, Tree};
use crate::moves::{laplace_fit, NodeTarget};
use crate::numeric::{half_cauchy_log_density, log_sum_exp};
use crate::strata::Stratum;

#[derive(Debug, Error, PartialEq)]
pub enum ArsError {
    #[error("target is not log-concave near x = {at}")]
    NotLogConcave { at: f64 },
    #[error("could not bracket the mode of the target (last slope {slope})")]
    Unbounded { slope: f64 },
    #[error("target evaluated to a non-finite value at x = {at}")]
    NonFinite { at: f64 },
    #[error("no acceptance after {0} proposals")]
    Exhausted(usize),
}

/// A univariate log-concave (unnormalized) log-density with derivative.
pub trait LogConcave {
    fn eval(&self, x: f64) -> (f64, f64);
}

impl LogConcave for NodeTarget<'_> {
    fn eval(&self, x: f64) -> (f64, f64) {
        NodeTarget::eval(self, x)
    }
}

impl<F: Fn(f64) -> (f64, f64)> LogConcave for F {
    fn eval(&self, x: f64) -> (f64, f64) {
        self(x)
    }
}

pub const ARS_MAX_POINTS: usize = 50;
const ARS_MAX_PROPOSALS: usize = 10_000;

#[derive(Debug, Clone, Copy)]
struct HullPoint {
    x: f64,
    h: f64,
    dh: f64,
}

/// Tangent-line upper hull and chord lower hull over the abscissae.
struct Hull {
    points: Vec<HullPoint>,
    /// `z[j]` is the right edge of the tangent segment of point `j`.
    z: Vec<f64>,
    log_mass: Vec<f64>,
}

fn segment_log_mass(h: f64, dh: f64, x0: f64, a: f64, b: f64) -> f64 {
    let ua = h + dh * (a - x0);
    let ub = h + dh * (b - x0);
    if dh.abs() * (b - a) < 1e-12 {
        return h + (b - a).ln();
    }
    if dh > 0.0 {
        ub + (-(ua - ub).exp_m1()).ln() - dh.ln()
    } else {
        ua + (-(ub - ua).exp_m1()).ln() - (-dh).ln()
    }
}

/// Draw from `exp(dh·x)` restricted to `[a, b]` by inverting its CDF.
fn segment_sample(dh: f64, a: f64, b: f64, q: f64) -> f64 {
    if dh.abs() * (b - a) < 1e-12 {
        return a + q * (b - a);
    }
    if dh > 0.0 {
        let e = (dh * (a - b)).exp();
        b + (e + q * (1.0 - e)).ln() / dh
    } else {
        let e = (dh * (b - a)).exp();
        a + (-q * (1.0 - e)).ln_1p() / dh
    }
}

impl Hull {
    fn build(points: Vec<HullPoint>) -> Result<Self, ArsError> {
        let k = points.len();
        let mut z = Vec::with_capacity(k);
        for j in 0..k - 1 {
            let (p, q) = (points[j], points[j + 1]);
            let tol = 1e-9 * (1.0 + p.dh.abs().max(q.dh.abs()));
            if q.dh > p.dh + tol {
                return Err(ArsError::NotLogConcave { at: q.x });
            }
            let zj = if (p.dh - q.dh).abs() <= tol {
                0.5 * (p.x + q.x)
            } else {
                (q.h - p.h - q.x * q.dh + p.x * p.dh) / (p.dh - q.dh)
            };
            z.push(zj.clamp(p.x, q.x));
        }
        z.push(f64::INFINITY);
        let log_mass = (0..k)
            .map(|j| {
                let a = if j == 0 { f64::NEG_INFINITY } else { z[j - 1] };
                segment_log_mass(points[j].h, points[j].dh, points[j].x, a, z[j])
            })
            .collect();
        Ok(Self { points, z, log_mass })
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let total = log_sum_exp(&self.log_mass);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut j = self.points.len() - 1;
        for (i, lm) in self.log_mass.iter().enumerate() {
            acc += (lm - total).exp();
            if u < acc {
                j = i;
                break;
            }
        }
        let p = self.points[j];
        let a = if j == 0 { f64::NEG_INFINITY } else { self.z[j - 1] };
        let q: f64 = rng.random();
        let x = segment_sample(p.dh, a, self.z[j], q);
        (x, p.h + p.dh * (x - p.x))
    }

    fn lower(&self, x: f64) -> f64 {
        let pts = &self.points;
        if x < pts[0].x || x > pts[pts.len() - 1].x {
            return f64::NEG_INFINITY;
        }
        let j = pts.partition_point(|p| p.x <= x).clamp(1, pts.len() - 1);
        let (p, q) = (pts[j - 1], pts[j]);
        if q.x == p.x {
            return p.h;
        }
        ((q.x - x) * p.h + (x - p.x) * q.h) / (q.x - p.x)
    }
}

fn hull_point<F: LogConcave + ?Sized>(f: &F, x: f64) -> Result<HullPoint, ArsError> {
    let (h, dh) = f.eval(x);
    if !h.is_finite() || !dh.is_finite() {
        return Err(ArsError::NonFinite { at: x });
    }
    Ok(HullPoint { x, h, dh })
}

/// One exact draw from a log-concave density by adaptive rejection
/// sampling. `init` seeds the abscissae (typically `{m - v, m, m + v}`);
/// they are extended outward until the outermost slopes bracket the mode.
pub fn ars_sample<F: LogConcave + ?Sized, R: Rng + ?Sized>(
    f: &F,
    init: &[f64],
    rng: &mut R,
) -> Result<f64, ArsError> {
    let mut xs: Vec<f64> = init.iter().copied().filter(|x| x.is_finite()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.is_empty() {
        xs.push(0.0);
    }
    let mut points = xs
        .iter()
        .map(|&x| hull_point(f, x))
        .collect::<Result<Vec<_>, _>>()?;
    let spread = (xs[xs.len() - 1] - xs[0]).max(1.0);
    let mut step = spread;
    while points[0].dh <= 0.0 {
        if points.len() >= ARS_MAX_POINTS {
            return Err(ArsError::Unbounded { slope: points[0].dh });
        }
        let x = points[0].x - step;
        points.insert(0, hull_point(f, x)?);
        step *= 2.0;
    }
    step = spread;
    while points[points.len() - 1].dh >= 0.0 {
        if points.len() >= ARS_MAX_POINTS {
            return Err(ArsError::Unbounded {
                slope: points[points.len() - 1].dh,
            });
        }
        let x = points[points.len() - 1].x + step;
        points.push(hull_point(f, x)?);
        step *= 2.0;
    }
    let mut hull = Hull::build(points)?;
    for _ in 0..ARS_MAX_PROPOSALS {
        let (x, upper) = hull.sample(rng);
        let ln_u = rng.random::<f64>().ln();
        if ln_u <= hull.lower(x) - upper {
            return Ok(x);
        }
        let p = hull_point(f, x)?;
        if p.h > upper + 1e-8 * (1.0 + upper.abs()) {
            return Err(ArsError::NotLogConcave { at: x });
        }
        if ln_u <= p.h - upper {
            return Ok(x);
        }
        if hull.points.len() < ARS_MAX_POINTS {
            let mut pts = std::mem::take(&mut hull.points);
            let at = pts.partition_point(|q| q.x < x);
            if pts.get(at).is_none_or(|q| q.x != x) {
                pts.insert(at, p);
            }
            hull = Hull::build(pts)?;
        }
    }
    Err(ArsError::Exhausted(ARS_MAX_PROPOSALS))
}

/// Redraws every leaf of `tree` from its full conditional given the
/// offsets (the other trees' contributions).
pub fn refresh_leaves<R: Rng + ?Sized>(
    tree: &mut Tree,
    parts: &[LinearPredictorParts],
    moderators: &[Vec<f64>],
    offsets: &[f64],
    sigma_mu: f64,
    rng: &mut R,
) -> Result<(), ArsError> {
    let leaves = tree.leaves();
    let groups = tree.partition(moderators);
    for (path, members) in leaves.iter().zip(&groups) {
        let current = tree.get(path).mu().expect("leaf");
        let target = NodeTarget::new(parts, offsets, members, sigma_mu);
        let (m, v) = match laplace_fit(&target, current) {
            Some(fit) => (fit.mean, fit.sd),
            None => (current, sigma_mu),
        };
        let mu = ars_sample(&target, &[m - v, m, m + v], rng)?;
        *tree.get_mut(path) = Node::leaf(mu);
    }
    Ok(())
}

/// Windowed acceptance-rate tuning of a proposal variance multiplier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveScale {
    pub scale: f64,
    pub window: usize,
    pub low: f64,
    pub high: f64,
    accepted: usize,
    seen: usize,
    total_accepted: usize,
    total_seen: usize,
}

impl AdaptiveScale {
    pub fn new(scale: f64, window: usize, low: f64, high: f64) -> Self {
        Self {
            scale,
            window,
            low,
            high,
            accepted: 0,
            seen: 0,
            total_accepted: 0,
            total_seen: 0,
        }
    }

    /// Records one proposal; at the end of each window the scale is
    /// multiplied by 1.1 above the band and 0.9 below it when `adapt`.
    pub fn record(&mut self, accepted: bool, adapt: bool) {
        self.seen += 1;
        self.total_seen += 1;
        if accepted {
            self.accepted += 1;
            self.total_accepted += 1;
        }
        if self.seen == self.window {
            let rate = self.accepted as f64 / self.window as f64;
            if adapt {
                if rate > self.high {
                    self.scale *= 1.1;
                } else if rate < self.low {
                    self.scale *= 0.9;
                }
            }
            self.seen = 0;
            self.accepted = 0;
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.total_seen == 0 {
            0.0
        } else {
            self.total_accepted as f64 / self.total_seen as f64
        }
    }

    pub fn reset_totals(&mut self) {
        self.total_accepted = 0;
        self.total_seen = 0;
    }
}

/// Log full conditional of σ_μ up to a constant, on the σ scale.
pub fn sigma_mu_log_target(sigma: f64, leaves: &[f64], prior_scale: f64) -> f64 {
    if sigma <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let ss: f64 = leaves.iter().map(|m| m * m).sum();
    -(leaves.len() as f64) * sigma.ln() - 0.5 * ss / (sigma * sigma)
        + half_cauchy_log_density(sigma, prior_scale)
}

/// Random-walk Metropolis step on `log σ_μ` with proposal sd `step`.
pub fn update_sigma_mu<R: Rng + ?Sized>(
    sigma: f64,
    leaves: &[f64],
    prior_scale: f64,
    step: f64,
    rng: &mut R,
) -> (f64, bool) {
    let e: f64 = StandardNormal.sample(rng);
    let proposal = sigma * (step * e).exp();
    // Jacobian of the log transform
    let log_r = sigma_mu_log_target(proposal, leaves, prior_scale) + proposal.ln()
        - sigma_mu_log_target(sigma, leaves, prior_scale)
        - sigma.ln();
    if rng.random::<f64>().ln() < log_r {
        (proposal, true)
    } else {
        (sigma, false)
    }
}

/// `log G` for `G ~ Gamma(shape, 1)`, accurate for tiny shapes.
fn log_gamma_draw<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        return g.ln();
    }
    let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
    let u: f64 = rng.random::<f64>();
    g.ln() + u.ln() / shape
}

/// Conjugate draw `s ~ Dir(a/P + u_1, …, a/P + u_P)` from the forest's
/// split counts. Components are floored at the smallest positive double.
pub fn update_split_probs<R: Rng + ?Sized>(a: f64, counts: &[usize], rng: &mut R) -> Vec<f64> {
    let p = counts.len() as f64;
    let logs: Vec<f64> = counts
        .iter()
        .map(|&u| log_gamma_draw(a / p + u as f64, rng))
        .collect();
    let total = log_sum_exp(&logs);
    logs.iter()
        .map(|l| (l - total).exp().max(f64::MIN_POSITIVE))
        .collect()
}

/// Grid for `a/(a + P)`: 0.025, 0.050, …, 0.975.
pub fn concentration_grid(n_vars: usize) -> Vec<f64> {
    let p = n_vars as f64;
    (1..=39)
        .map(|g| {
            let lambda = g as f64 * 0.025;
            p * lambda / (1.0 - lambda)
        })
        .collect()
}

/// Normalized posterior weights over [`concentration_grid`] given `s`, with
/// a Beta(0.5, 1) prior on `a/(a + P)`.
pub fn concentration_weights(s: &[f64]) -> Vec<f64> {
    let p = s.len() as f64;
    let sum_log_s: f64 = s.iter().map(|v| v.ln()).sum();
    let grid = concentration_grid(s.len());
    let logw: Vec<f64> = grid
        .iter()
        .map(|&a| {
            let lambda = a / (a + p);
            ln_gamma(a) - p * ln_gamma(a / p) + (a / p - 1.0) * sum_log_s - 0.5 * lambda.ln()
        })
        .collect();
    let total = log_sum_exp(&logw);
    logw.iter().map(|l| (l - total).exp()).collect()
}

pub fn update_concentration<R: Rng + ?Sized>(s: &[f64], rng: &mut R) -> f64 {
    let weights = concentration_weights(s);
    let grid = concentration_grid(s.len());
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, w) in grid.iter().zip(&weights) {
        acc += w;
        if u < acc {
            return *a;
        }
    }
    grid[grid.len() - 1]
}

/// Independent Normal prior on each β component; `None` is flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub sd: f64,
}

fn beta_log_prior(beta: &[f64], prior: Option<BetaPrior>) -> f64 {
    prior.map_or(0.0, |p| {
        beta.iter().map(|b| -0.5 * (b / p.sd).powi(2)).sum()
    })
}

/// Conditional log-likelihood of β given per-stratum effects.
pub fn beta_loglik(strata: &[Stratum], beta: &[f64], tau: &[f64]) -> f64 {
    strata
        .iter()
        .zip(tau)
        .map(|(s, &t)| LinearPredictorParts::new(s, beta).loglik(t))
        .sum()
}

/// Random-walk step `β' ~ N(β, scale · V)` given the lower Cholesky factor
/// of `V`. Returns the new β, its log-likelihood, and whether it moved.
#[allow(clippy::too_many_arguments)]
pub fn update_beta<R: Rng + ?Sized>(
    strata: &[Stratum],
    beta: &[f64],
    current_loglik: f64,
    tau: &[f64],
    chol: &[Vec<f64>],
    scale: f64,
    prior: Option<BetaPrior>,
    rng: &mut R,
) -> (Vec<f64>, f64, bool) {
    let q = beta.len();
    let e: Vec<f64> = (0..q).map(|_| StandardNormal.sample(rng)).collect();
    let sd = scale.sqrt();
    let proposal: Vec<f64> = (0..q)
        .map(|i| beta[i] + sd * (0..=i).map(|j| chol[i][j] * e[j]).sum::<f64>())
        .collect();
    let ll = beta_loglik(strata, &proposal, tau);
    let log_r = ll + beta_log_prior(&proposal, prior) - current_loglik - beta_log_prior(beta, prior);
    if rng.random::<f64>().ln() < log_r {
        (proposal, ll, true)
    } else {
        (beta.to_vec(), current_loglik, false)
    }
}

/// Lower Cholesky factor of a symmetric positive-definite matrix, with
/// diagonal jitter added until it factors.
pub fn cholesky_lower(v: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let q = v.len();
    if q == 0 {
        return Vec::new();
    }
    let mut jitter = 0.0;
    loop {
        let m = nalgebra::DMatrix::from_fn(q, q, |i, j| v[i][j] + if i == j { jitter } else { 0.0 });
        if let Some(c) = m.cholesky() {
            let l = c.l();
            return (0..q).map(|i| (0..q).map(|j| l[(i, j)]).collect()).collect();
        }
        let diag = (0..q).map(|i| v[i][i].abs()).fold(0.0, f64::max).max(1e-12);
        jitter = if jitter == 0.0 { 1e-10 * diag } else { jitter * 10.0 };
    }
}

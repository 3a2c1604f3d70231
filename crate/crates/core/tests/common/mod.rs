//! Fixtures and independent reference computations shared by the
//! integration tests.
#![allow(dead_code)]

use clbart::strata::{Dataset, ModeratorKind, Stratum};
use rand::Rng;

/// A stratum with `rows` rows, exposure and confounders uniform on (-1, 1)
/// and a uniformly chosen case row.
pub fn random_stratum<R: Rng + ?Sized>(rng: &mut R, id: usize, rows: usize, q: usize, w: Vec<f64>) -> Stratum {
    let case = rng.random_range(0..rows);
    let data = (0..rows)
        .map(|_| {
            let z = rng.random_range(-1.0..1.0);
            let x = (0..q).map(|_| rng.random_range(-1.0..1.0)).collect();
            (z, x)
        })
        .collect();
    Stratum::new(format!("s{id}"), case, data, w).unwrap()
}

/// A stratum whose case row is drawn from the conditional logistic model
/// with linear predictor `tau·z + x·beta`; exposure is binary.
pub fn model_stratum<R: Rng + ?Sized>(
    rng: &mut R,
    id: usize,
    rows: usize,
    beta: &[f64],
    tau: f64,
    w: Vec<f64>,
) -> Stratum {
    let data: Vec<(f64, Vec<f64>)> = (0..rows)
        .map(|t| {
            // Guarantee exposure variation: first two rows differ.
            let z = match t {
                0 => 1.0,
                1 => 0.0,
                _ => f64::from(rng.random_bool(0.4)),
            };
            let x = beta.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
            (z, x)
        })
        .collect();
    let eta: Vec<f64> = data.iter().map(|(z, x)| tau * z + dot(x, beta)).collect();
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = eta.iter().map(|e| (e - m).exp()).collect();
    let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut case = rows - 1;
    for (t, wt) in weights.iter().enumerate() {
        if u < *wt {
            case = t;
            break;
        }
        u -= wt;
    }
    Stratum::new(format!("s{id}"), case, data, w).unwrap()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Conditional log-likelihood of one stratum, written out directly.
pub fn naive_loglik(s: &Stratum, beta: &[f64], tau: f64) -> f64 {
    let eta: Vec<f64> = (0..s.n_rows())
        .map(|t| tau * s.exposure()[t] + dot(s.confounders(t), beta))
        .collect();
    let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    eta[s.case_index()] - m - eta.iter().map(|e| (e - m).exp()).sum::<f64>().ln()
}

pub fn dataset(strata: Vec<Stratum>, n_moderators: usize, kinds: ModeratorKind, q: usize) -> Dataset {
    Dataset::new(
        strata,
        (1..=n_moderators).map(|j| format!("w_{j}")).collect(),
        vec![kinds; n_moderators],
        (1..=q).map(|j| format!("x_{j}")).collect(),
    )
    .unwrap()
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Trapezoid quadrature of `exp(log_f)` on a uniform grid, returning the
/// grid, the normalized density and the normalized CDF.
pub fn normalized_grid(log_f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + h * i as f64).collect();
    let lf: Vec<f64> = xs.iter().map(|&x| log_f(x)).collect();
    let m = lf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f: Vec<f64> = lf.iter().map(|l| (l - m).exp()).collect();
    let mut cdf = vec![0.0; n];
    for i in 1..n {
        cdf[i] = cdf[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    }
    let z = cdf[n - 1];
    (
        xs,
        f.iter().map(|v| v / z).collect(),
        cdf.iter().map(|c| c / z).collect(),
    )
}

/// Posterior of one leaf value `μ ~ N(0, σ²)` shared by `members`, by
/// quadrature: log marginal likelihood, mean and variance.
#[derive(Debug, Clone, Copy)]
pub struct LeafPosterior {
    pub log_ml: f64,
    pub mean: f64,
    pub var: f64,
}

pub fn leaf_posterior(members: &[&Stratum], sigma: f64) -> LeafPosterior {
    let log_prior = |mu: f64| -0.5 * (mu / sigma).powi(2) - (sigma * (2.0 * std::f64::consts::PI).sqrt()).ln();
    let lf = |mu: f64| log_prior(mu) + members.iter().map(|s| naive_loglik(s, &[], mu)).sum::<f64>();
    let half = 12.0 * sigma.max(1.0);
    let n = 200_001;
    let h = 2.0 * half / (n - 1) as f64;
    let vals: Vec<f64> = (0..n).map(|i| lf(-half + h * i as f64)).collect();
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
    for (i, v) in vals.iter().enumerate() {
        let x = -half + h * i as f64;
        let wgt = if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * (v - m).exp();
        z += wgt;
        m1 += wgt * x;
        m2 += wgt * x * x;
    }
    let mean = m1 / z;
    LeafPosterior {
        log_ml: m + (z * h).ln(),
        mean,
        var: m2 / z - mean * mean,
    }
}

/// Single binary moderator, 30 strata alternating w = 0, 1, with effects
/// 0.2 and 0.8.
pub fn micro_dataset(seed: u64) -> Dataset {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let strata = (0..30)
        .map(|i| {
            let w = (i % 2) as f64;
            let rows = rng.random_range(3..=5);
            model_stratum(&mut rng, i, rows, &[], 0.2 + 0.6 * w, vec![w])
        })
        .collect();
    dataset(strata, 1, ModeratorKind::Binary, 0)
}

/// Exact posterior of a one-tree model over a single binary moderator: the
/// root either stays a leaf or splits on the only available rule, after
/// which neither child can split.
pub struct MicroOracle {
    pub p_split: f64,
    pub root: LeafPosterior,
    pub left: LeafPosterior,
    pub right: LeafPosterior,
    pub n_left: usize,
    pub n_right: usize,
}

impl MicroOracle {
    pub fn new(d: &Dataset, sigma: f64, gamma: f64) -> Self {
        let group = |g: Option<f64>| -> Vec<&Stratum> {
            d.strata
                .iter()
                .filter(|s| g.is_none_or(|v| s.moderators()[0] == v))
                .collect()
        };
        let (l, r) = (group(Some(0.0)), group(Some(1.0)));
        let root = leaf_posterior(&group(None), sigma);
        let left = leaf_posterior(&l, sigma);
        let right = leaf_posterior(&r, sigma);
        let log_root = (1.0 - gamma).ln() + root.log_ml;
        let log_split = gamma.ln() + left.log_ml + right.log_ml;
        Self {
            p_split: 1.0 / (1.0 + (log_root - log_split).exp()),
            root,
            left,
            right,
            n_left: l.len(),
            n_right: r.len(),
        }
    }

    /// Posterior mean and standard deviation of the average effect τ̄.
    pub fn average_effect(&self) -> (f64, f64) {
        let n = (self.n_left + self.n_right) as f64;
        let (a, b) = (self.n_left as f64 / n, self.n_right as f64 / n);
        let split_mean = a * self.left.mean + b * self.right.mean;
        let split_var = a * a * self.left.var + b * b * self.right.var;
        let p = self.p_split;
        let mean = p * split_mean + (1.0 - p) * self.root.mean;
        let second = p * (split_var + split_mean.powi(2)) + (1.0 - p) * (self.root.var + self.root.mean.powi(2));
        (mean, (second - mean * mean).sqrt())
    }
}

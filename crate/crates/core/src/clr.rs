//! Conditional logistic likelihood for case-crossover strata.
//!
//! Per stratum the log-likelihood is
//!
//! ```text
//! ℓ(τ) = η_case + τ z_case − log Σ_t exp(η_t + τ z_t),   η_t = x_tᵀβ
//! ```
//!
//! with score `z_case − Σ z_t p_t` and information `Σ p_t (z_t − z̄)²`, where
//! `p_t` are the softmax weights of the linear predictor. The information is
//! both the Fisher and the observed information, and is never negative.
//!
//! [`clr_fit`] is the ordinary frequentist fitter (Newton–Raphson with step
//! halving) over the full coefficient vector.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::strata::{Dataset, Stratum};

#[derive(Debug, Error, PartialEq)]
pub enum ClrError {
    #[error("coefficients are not identifiable (reciprocal condition number {rcond:.3e})")]
    Identifiability { rcond: f64 },
    #[error("Newton-Raphson did not converge in {iterations} iterations (max |score| {max_score:.3e})")]
    Convergence { iterations: usize, max_score: f64 },
}

pub const SCORE_TOLERANCE: f64 = 1e-8;
pub const MAX_NEWTON_ITERATIONS: usize = 100;
pub const MAX_STEP_HALVINGS: usize = 20;
pub const MIN_RCOND: f64 = 1e-12;

/// The pieces of one stratum's linear predictor that stay fixed while the
/// exposure effect varies: the confounder part `x_tᵀβ` and the exposure `z_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictorParts {
    pub confounder_part: Vec<f64>,
    pub z: Vec<f64>,
    pub case_index: usize,
}

impl LinearPredictorParts {
    pub fn new(s: &Stratum, beta: &[f64]) -> Self {
        Self {
            confounder_part: s.confounder_part(beta),
            z: s.exposure().to_vec(),
            case_index: s.case_index(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.z.len()
    }

    fn max_eta(&self, tau: f64) -> f64 {
        self.confounder_part
            .iter()
            .zip(&self.z)
            .map(|(c, z)| c + tau * z)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Log-likelihood at total exposure effect `tau`.
    pub fn loglik(&self, tau: f64) -> f64 {
        let m = self.max_eta(tau);
        let sum: f64 = self
            .confounder_part
            .iter()
            .zip(&self.z)
            .map(|(c, z)| (c + tau * z - m).exp())
            .sum();
        let case = self.confounder_part[self.case_index] + tau * self.z[self.case_index];
        case - m - sum.ln()
    }

    /// `(loglik, score, information)` in a single pass.
    pub fn loglik_score_info(&self, tau: f64) -> (f64, f64, f64) {
        let m = self.max_eta(tau);
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for (c, z) in self.confounder_part.iter().zip(&self.z) {
            let e = (c + tau * z - m).exp();
            s0 += e;
            s1 += e * z;
        }
        let zbar = s1 / s0;
        let mut var = 0.0;
        for (c, z) in self.confounder_part.iter().zip(&self.z) {
            let e = (c + tau * z - m).exp();
            var += e * (z - zbar) * (z - zbar);
        }
        let zc = self.z[self.case_index];
        let ll = self.confounder_part[self.case_index] + tau * zc - m - s0.ln();
        (ll, zc - zbar, var / s0)
    }

    pub fn score_info(&self, tau: f64) -> (f64, f64) {
        let (_, u, i) = self.loglik_score_info(tau);
        (u, i)
    }
}

pub fn stratum_loglik(s: &Stratum, beta: &[f64], tau: f64) -> f64 {
    LinearPredictorParts::new(s, beta).loglik(tau)
}

/// Score and Fisher information of the stratum log-likelihood in `tau`.
pub fn stratum_score_fisher(s: &Stratum, beta: &[f64], tau: f64) -> (f64, f64) {
    LinearPredictorParts::new(s, beta).score_info(tau)
}

/// Total log-likelihood of a dataset with a per-stratum exposure effect.
pub fn dataset_loglik(d: &Dataset, beta: &[f64], tau: &[f64]) -> f64 {
    d.strata
        .iter()
        .zip(tau)
        .map(|(s, &t)| stratum_loglik(s, beta, t))
        .sum()
}

/// A stratum expressed as a design matrix: `values[t * n_coef + j]` is
/// covariate `j` at row `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignStratum {
    pub case_index: usize,
    pub n_coef: usize,
    pub values: Vec<f64>,
}

impl DesignStratum {
    pub fn n_rows(&self) -> usize {
        self.values.len() / self.n_coef.max(1)
    }

    fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_coef..(t + 1) * self.n_coef]
    }

    /// False when every row is identical, in which case the stratum adds
    /// only the constant `−log |rows|` to the likelihood.
    pub fn is_informative(&self) -> bool {
        let first = self.row(0);
        (1..self.n_rows()).any(|t| self.row(t) != first)
    }

    /// Adds this stratum's log-likelihood, score and information at `coef`.
    fn accumulate(&self, coef: &[f64], grad: &mut [f64], info: &mut DMatrix<f64>) -> f64 {
        let p = self.n_coef;
        let n = self.n_rows();
        let eta: Vec<f64> = (0..n)
            .map(|t| self.row(t).iter().zip(coef).map(|(a, b)| a * b).sum())
            .collect();
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = eta.iter().map(|e| (e - m).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut mean = vec![0.0; p];
        for t in 0..n {
            let pt = w[t] / total;
            for (mj, xj) in mean.iter_mut().zip(self.row(t)) {
                *mj += pt * xj;
            }
        }
        let case = self.row(self.case_index);
        for j in 0..p {
            grad[j] += case[j] - mean[j];
        }
        for t in 0..n {
            let pt = w[t] / total;
            let row = self.row(t);
            for j in 0..p {
                let dj = row[j] - mean[j];
                for k in 0..=j {
                    info[(j, k)] += pt * dj * (row[k] - mean[k]);
                }
            }
        }
        eta[self.case_index] - m - total.ln()
    }

    fn loglik(&self, coef: &[f64]) -> f64 {
        let n = self.n_rows();
        let eta: Vec<f64> = (0..n)
            .map(|t| self.row(t).iter().zip(coef).map(|(a, b)| a * b).sum())
            .collect();
        let m = eta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = eta.iter().map(|e| (e - m).exp()).sum();
        eta[self.case_index] - m - total.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClrFit {
    pub beta_hat: Vec<f64>,
    /// Inverse observed information at `beta_hat`.
    pub covariance: Vec<Vec<f64>>,
    pub loglik: f64,
    pub iterations: usize,
}

impl ClrFit {
    pub fn std_error(&self, j: usize) -> f64 {
        self.covariance[j][j].sqrt()
    }
}

/// Design over the dataset's confounders, optionally followed by the exposure
/// as a final column (homogeneous τ).
pub fn dataset_design(d: &Dataset, include_homogeneous_tau: bool) -> Vec<DesignStratum> {
    let px = d.n_confounders();
    let n_coef = px + usize::from(include_homogeneous_tau);
    d.strata
        .iter()
        .map(|s| {
            let mut values = Vec::with_capacity(s.n_rows() * n_coef);
            for t in 0..s.n_rows() {
                values.extend_from_slice(s.confounders(t));
                if include_homogeneous_tau {
                    values.push(s.exposure()[t]);
                }
            }
            DesignStratum {
                case_index: s.case_index(),
                n_coef,
                values,
            }
        })
        .collect()
}

pub fn clr_fit(d: &Dataset, include_homogeneous_tau: bool) -> Result<ClrFit, ClrError> {
    let n_coef = d.n_confounders() + usize::from(include_homogeneous_tau);
    clr_fit_design(&dataset_design(d, include_homogeneous_tau), n_coef)
}

fn evaluate(
    strata: &[&DesignStratum],
    coef: &[f64],
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let p = coef.len();
    let mut grad = vec![0.0; p];
    let mut info = DMatrix::zeros(p, p);
    let mut ll = 0.0;
    for s in strata {
        ll += s.accumulate(coef, &mut grad, &mut info);
    }
    for j in 0..p {
        for k in 0..j {
            info[(k, j)] = info[(j, k)];
        }
    }
    (ll, DVector::from_vec(grad), info)
}

fn rcond(info: &DMatrix<f64>) -> f64 {
    let eig = info.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || !max.is_finite() {
        0.0
    } else {
        (min / max).max(0.0)
    }
}

/// Maximizes the conditional log-likelihood of an arbitrary design.
pub fn clr_fit_design(strata: &[DesignStratum], n_coef: usize) -> Result<ClrFit, ClrError> {
    let constant: f64 = strata
        .iter()
        .filter(|s| n_coef == 0 || !s.is_informative())
        .map(|s| -(s.n_rows() as f64).ln())
        .sum();
    if n_coef == 0 {
        return Ok(ClrFit {
            beta_hat: vec![],
            covariance: vec![],
            loglik: constant,
            iterations: 0,
        });
    }
    let active: Vec<&DesignStratum> = strata.iter().filter(|s| s.is_informative()).collect();
    let mut coef = vec![0.0; n_coef];
    let (mut ll, mut grad, mut info) = evaluate(&active, &coef);
    let mut iterations = 0;
    loop {
        let max_score = grad.amax();
        if max_score < SCORE_TOLERANCE {
            break;
        }
        if iterations >= MAX_NEWTON_ITERATIONS {
            return Err(ClrError::Convergence {
                iterations,
                max_score,
            });
        }
        let rc = rcond(&info);
        if rc < MIN_RCOND {
            return Err(ClrError::Identifiability { rcond: rc });
        }
        let step = info
            .clone()
            .cholesky()
            .map(|c| c.solve(&grad))
            .ok_or(ClrError::Identifiability { rcond: rc })?;
        iterations += 1;
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_STEP_HALVINGS {
            let trial: Vec<f64> = coef
                .iter()
                .zip(step.iter())
                .map(|(c, s)| c + scale * s)
                .collect();
            let trial_ll: f64 = active.iter().map(|s| s.loglik(&trial)).sum();
            if trial_ll.is_finite() && trial_ll >= ll - 1e-12 * ll.abs().max(1.0) {
                accepted = Some(trial);
                break;
            }
            scale *= 0.5;
        }
        match accepted {
            Some(next) => {
                coef = next;
                (ll, grad, info) = evaluate(&active, &coef);
            }
            // halving exhausted: no ascent direction left at working precision
            None => break,
        }
    }
    let rc = rcond(&info);
    if rc < MIN_RCOND {
        return Err(ClrError::Identifiability { rcond: rc });
    }
    let inv = info
        .clone()
        .try_inverse()
        .ok_or(ClrError::Identifiability { rcond: rc })?;
    let covariance = (0..n_coef)
        .map(|j| (0..n_coef).map(|k| 0.5 * (inv[(j, k)] + inv[(k, j)])).collect())
        .collect();
    Ok(ClrFit {
        beta_hat: coef,
        covariance,
        loglik: ll + constant,
        iterations,
    })
}

//! Propensity scores by penalised logistic regression (IRLS).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;

pub const RIDGE: f64 = 1e-6;
pub const MAX_ITER: usize = 100;
pub const TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    /// Z-classes in one-hot column order.
    pub classes: Vec<String>,
    pub intercept: f64,
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn linear(row: &[f64], beta: &[f64]) -> f64 {
    beta[0] + row.iter().zip(&beta[1..]).map(|(x, b)| x * b).sum::<f64>()
}

/// Penalised log-likelihood; `beta[0]` is the unpenalised intercept.
pub fn log_likelihood(x: &[Vec<f64>], y: &[bool], beta: &[f64], ridge: f64) -> f64 {
    let ll: f64 = x
        .iter()
        .zip(y)
        .map(|(row, &yi)| {
            let z = linear(row, beta);
            // log(1 + e^z) computed stably
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            if yi {
                z - softplus
            } else {
                -softplus
            }
        })
        .sum();
    ll - 0.5 * ridge * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

/// Gradient of [`log_likelihood`].
pub fn gradient(x: &[Vec<f64>], y: &[bool], beta: &[f64], ridge: f64) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for (row, &yi) in x.iter().zip(y) {
        let r = f64::from(u8::from(yi)) - sigmoid(linear(row, beta));
        g[0] += r;
        for (gj, xj) in g[1..].iter_mut().zip(row) {
            *gj += r * xj;
        }
    }
    for (gj, bj) in g[1..].iter_mut().zip(&beta[1..]) {
        *gj -= ridge * bj;
    }
    g
}

/// Fits `P(treated | x)` by Newton / IRLS iterations. Returns the
/// coefficient vector with the intercept first.
pub fn fit_logistic(x: &[Vec<f64>], y: &[bool]) -> Result<(Vec<f64>, usize, bool)> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::LogisticFit(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let k = x[0].len();
    if x.iter().any(|r| r.len() != k) {
        return Err(Error::LogisticFit("ragged feature rows".into()));
    }
    let positives = y.iter().filter(|v| **v).count();
    if positives == 0 || positives == y.len() {
        return Err(Error::LogisticFit("labels contain a single class".into()));
    }
    let dim = k + 1;
    let mut beta = vec![0.0; dim];
    for it in 1..=MAX_ITER {
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for row in x {
            let p = sigmoid(linear(row, &beta));
            let w = p * (1.0 - p);
            let full: Vec<f64> = std::iter::once(1.0).chain(row.iter().copied()).collect();
            for a in 0..dim {
                if full[a] == 0.0 {
                    continue;
                }
                for b in 0..dim {
                    h[(a, b)] += w * full[a] * full[b];
                }
            }
        }
        for j in 1..dim {
            h[(j, j)] += RIDGE;
        }
        let g = DVector::from_vec(gradient(x, y, &beta, RIDGE));
        let step = solve_spd(h, &g)
            .ok_or_else(|| Error::LogisticFit(format!("singular information matrix at iteration {it}")))?;
        let mut max_change: f64 = 0.0;
        for (b, s) in beta.iter_mut().zip(step.iter()) {
            *b += s;
            max_change = max_change.max(s.abs());
        }
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::LogisticFit("non-finite coefficients".into()));
        }
        if max_change < TOL {
            return Ok((beta, it, true));
        }
    }
    log::warn!("logistic regression hit {MAX_ITER} iterations without converging");
    Ok((beta, MAX_ITER, false))
}

impl PropensityModel {
    /// One-hot encodes `z` over its sorted distinct classes and fits.
    pub fn fit(z: &[&str], treated: &[bool]) -> Result<Self> {
        let mut classes: Vec<String> = z.iter().map(|s| s.to_string()).collect();
        classes.sort_unstable();
        classes.dedup();
        let x: Vec<Vec<f64>> = z.iter().map(|v| one_hot(&classes, v)).collect();
        let (beta, iterations, converged) = fit_logistic(&x, treated)?;
        Ok(Self {
            classes,
            intercept: beta[0],
            weights: beta[1..].to_vec(),
            iterations,
            converged,
        })
    }

    pub fn propensity(&self, z: &str) -> f64 {
        let w = self
            .classes
            .binary_search_by(|c| c.as_str().cmp(z))
            .map_or(0.0, |i| self.weights[i]);
        sigmoid(self.intercept + w)
    }
}

fn one_hot(classes: &[String], v: &str) -> Vec<f64> {
    classes.iter().map(|c| if c == v { 1.0 } else { 0.0 }).collect()
}

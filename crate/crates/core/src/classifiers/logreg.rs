//! Logistic regression with an elastic-net penalty, fitted by proximal
//! gradient descent. `alpha = 1` is the LASSO.
//!
//! Objective: `mean BCE + lambda * (alpha * |w|_1 + (1 - alpha) / 2 * |w|_2^2)`.
//! The intercept is not penalized.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{invalid, require_both_classes, FeatureScaler, Fitted, ModelParams};
use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::linalg::{eig_sym, SquareMatrix};
use crate::math::{sigmoid, softplus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    pub lambda: f64,
    /// Mix between L1 (`1.0`) and L2 (`0.0`).
    pub alpha: f64,
    pub max_iter: usize,
    /// Stop once no coefficient moves by more than this.
    pub tolerance: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self::elastic_net()
    }
}

impl PenaltyConfig {
    pub fn lasso() -> Self {
        Self { lambda: 0.01, alpha: 1.0, max_iter: 2000, tolerance: 1e-10 }
    }

    pub fn elastic_net() -> Self {
        Self { alpha: 0.5, ..Self::lasso() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(invalid("lambda", format!("{} must be non-negative", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("alpha", format!("{} is outside [0, 1]", self.alpha)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "need at least one iteration"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(invalid("tolerance", "must be non-negative"));
        }
        Ok(())
    }
}

/// `sign(v) * max(|v| - t, 0)`.
pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub scaler: FeatureScaler,
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Iterations actually run.
    pub iterations: usize,
}

impl LogisticParams {
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let x = self.scaler.transform_row(row);
        sigmoid(logit(&self.weights, self.intercept, &x))
    }
}

fn logit(w: &[f64], b: f64, x: &[f64]) -> f64 {
    b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()
}

/// Penalized objective on already-scaled rows.
pub fn penalized_objective(weights: &[f64], intercept: f64, xs: &[Vec<f64>], ys: &[u8], cfg: &PenaltyConfig) -> f64 {
    let n = xs.len().max(1) as f64;
    let loss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = logit(weights, intercept, x);
            softplus(z) - f64::from(y) * z
        })
        .sum::<f64>()
        / n;
    let l1: f64 = weights.iter().map(|w| w.abs()).sum();
    let l2: f64 = weights.iter().map(|w| w * w).sum();
    loss + cfg.lambda * (cfg.alpha * l1 + 0.5 * (1.0 - cfg.alpha) * l2)
}

/// Lipschitz constant of the smooth part: largest eigenvalue of
/// `X~^T X~ / n` over 4, with `X~` the design plus an intercept column.
fn lipschitz(xs: &[Vec<f64>], d: usize) -> Result<f64> {
    let p = d + 1;
    let mut gram = SquareMatrix::zeros(p);
    for x in xs {
        for i in 0..p {
            let xi = if i < d { x[i] } else { 1.0 };
            for j in i..p {
                let xj = if j < d { x[j] } else { 1.0 };
                gram.set(i, j, gram.get(i, j) + xi * xj);
            }
        }
    }
    let n = xs.len() as f64;
    for i in 0..p {
        for j in i..p {
            let v = gram.get(i, j) / n;
            gram.set(i, j, v);
            gram.set(j, i, v);
        }
    }
    let eig = eig_sym(&gram)?;
    Ok(eig.values[0].max(f64::MIN_POSITIVE) / 4.0)
}

pub(super) fn train(data: &EncodedMatrix, cfg: &PenaltyConfig) -> Result<Fitted> {
    require_both_classes(data.labels())?;
    let scaler = FeatureScaler::fit(data);
    let xs = scaler.transform(data);
    let ys = data.labels();
    let d = data.n_cols();
    let n = xs.len() as f64;
    let step = 1.0 / (lipschitz(&xs, d)? * (1.0 + 1e-9));

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut grad = vec![0.0; d];
    let mut trace = Vec::with_capacity(cfg.max_iter + 1);
    trace.push(penalized_objective(&w, b, &xs, ys, cfg));
    let mut warnings = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        iterations = it;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let r = sigmoid(logit(&w, b, x)) - f64::from(y);
            for (g, v) in grad.iter_mut().zip(x) {
                *g += r * v;
            }
            grad_b += r;
        }
        let mut max_change: f64 = 0.0;
        for (wi, g) in w.iter_mut().zip(&grad) {
            let v = *wi - step * g / n;
            let next = soft_threshold(v, step * cfg.lambda * cfg.alpha) / (1.0 + step * cfg.lambda * (1.0 - cfg.alpha));
            max_change = max_change.max((next - *wi).abs());
            *wi = next;
        }
        let next_b = b - step * grad_b / n;
        max_change = max_change.max((next_b - b).abs());
        b = next_b;
        let obj = penalized_objective(&w, b, &xs, ys, cfg);
        if !obj.is_finite() {
            return Err(Error::NonFiniteLoss(it));
        }
        trace.push(obj);
        if max_change <= cfg.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        warnings.push(format!("{}", Error::NoConvergence(iterations)));
    }
    let params = LogisticParams { scaler, weights: w, intercept: b, iterations };
    Ok(Fitted { params: ModelParams::Logistic(params), loss_trace: trace, warnings })
}

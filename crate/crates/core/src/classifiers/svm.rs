//! Linear SVM: L2-regularized hinge loss minimized by deterministic
//! full-batch sub-gradient steps of size `1 / (lambda * t)`.
//!
//! The bias is carried as an extra weight on a constant input of 1 and is
//! regularized along with the other weights.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{invalid, require_both_classes, FeatureScaler, Fitted, ModelParams};
use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { lambda: 1e-3, epochs: 1000 }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(invalid("lambda", format!("{} must be positive", self.lambda)));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs", "need at least one epoch"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmParams {
    pub scaler: FeatureScaler,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearSvmParams {
    /// Signed decision value `w . x + b` of a raw row.
    pub fn decision(&self, row: &[f64]) -> f64 {
        let x = self.scaler.transform_row(row);
        self.bias + self.weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>()
    }
}

fn objective(w: &[f64], b: f64, xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * (b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())).max(0.0))
        .sum();
    let norm2: f64 = w.iter().map(|v| v * v).sum::<f64>() + b * b;
    0.5 * lambda * norm2 + hinge / xs.len() as f64
}

pub(super) fn train(data: &EncodedMatrix, cfg: &SvmConfig) -> Result<Fitted> {
    require_both_classes(data.labels())?;
    let scaler = FeatureScaler::fit(data);
    let xs = scaler.transform(data);
    let ys: Vec<f64> = data.labels().iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let d = data.n_cols();
    let n = xs.len() as f64;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut step_dir = vec![0.0; d];
    for t in 1..=cfg.epochs {
        let eta = 1.0 / (cfg.lambda * t as f64);
        step_dir.iter_mut().for_each(|v| *v = 0.0);
        let mut step_b = 0.0;
        for (x, &y) in xs.iter().zip(&ys) {
            let margin = y * (b + w.iter().zip(x).map(|(a, c)| a * c).sum::<f64>());
            if margin < 1.0 {
                for (s, v) in step_dir.iter_mut().zip(x) {
                    *s += y * v;
                }
                step_b += y;
            }
        }
        let shrink = 1.0 - eta * cfg.lambda;
        for (wi, s) in w.iter_mut().zip(&step_dir) {
            *wi = shrink * *wi + eta * s / n;
        }
        b = shrink * b + eta * step_b / n;
        let obj = objective(&w, b, &xs, &ys, cfg.lambda);
        if !obj.is_finite() {
            return Err(Error::NonFiniteLoss(t));
        }
        trace.push(obj);
    }
    Ok(Fitted { params: ModelParams::Svm(LinearSvmParams { scaler, weights: w, bias: b }), loss_trace: trace, warnings: Vec::new() })
}

//! One-hidden-layer perceptron with sigmoid units, trained by full-batch
//! gradient descent on mean binary cross-entropy.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{invalid, require_both_classes, FeatureScaler, Fitted, ModelParams};
use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::math::{sigmoid, softplus};
use crate::sampling::RandomSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    /// Initial weights are uniform in `[-init_range, init_range]`.
    pub init_range: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self { hidden: 8, learning_rate: 0.1, epochs: 500, init_range: 0.5 }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(invalid("hidden", "need at least one hidden unit"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning_rate", format!("{} must be positive", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs", "need at least one epoch"));
        }
        if !(self.init_range >= 0.0) {
            return Err(invalid("init_range", "must be non-negative"));
        }
        Ok(())
    }
}

/// Loss is compared against the value this many epochs earlier.
pub const LOSS_WINDOW: usize = 50;

/// Weights are laid out as `[w1 (hidden x inputs, row-major), b1, w2, b2]`
/// in [`MlpParams::flat`] and in gradient vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub scaler: FeatureScaler,
    pub n_inputs: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpParams {
    pub fn zeros(scaler: FeatureScaler, n_inputs: usize, hidden: usize) -> Self {
        Self {
            scaler,
            n_inputs,
            hidden,
            w1: vec![0.0; hidden * n_inputs],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    pub fn n_weights(&self) -> usize {
        self.hidden * self.n_inputs + 2 * self.hidden + 1
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_weights());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let a = self.w1.len();
        let h = self.hidden;
        self.w1.copy_from_slice(&flat[..a]);
        self.b1.copy_from_slice(&flat[a..a + h]);
        self.w2.copy_from_slice(&flat[a + h..a + 2 * h]);
        self.b2 = flat[a + 2 * h];
    }

    fn hidden_activations(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for h in 0..self.hidden {
            let w = &self.w1[h * self.n_inputs..(h + 1) * self.n_inputs];
            let z = self.b1[h] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            out.push(sigmoid(z));
        }
    }

    fn output_logit(&self, hidden: &[f64]) -> f64 {
        self.b2 + self.w2.iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Class-1 probability of a raw (unscaled) row.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let x = self.scaler.transform_row(row);
        let mut hidden = Vec::with_capacity(self.hidden);
        self.hidden_activations(&x, &mut hidden);
        sigmoid(self.output_logit(&hidden))
    }

    /// Mean cross-entropy and its gradient over already-scaled rows.
    pub(crate) fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[u8]) -> (f64, Vec<f64>) {
        let (d, hn) = (self.n_inputs, self.hidden);
        let mut grad = vec![0.0; self.n_weights()];
        let (gw1, rest) = grad.split_at_mut(hn * d);
        let (gb1, rest) = rest.split_at_mut(hn);
        let (gw2, gb2) = rest.split_at_mut(hn);
        let mut loss = 0.0;
        let mut a = Vec::with_capacity(hn);
        for (x, &y) in xs.iter().zip(ys) {
            let y = f64::from(y);
            self.hidden_activations(x, &mut a);
            let z = self.output_logit(&a);
            loss += softplus(z) - y * z;
            let dz = sigmoid(z) - y;
            gb2[0] += dz;
            for h in 0..hn {
                gw2[h] += dz * a[h];
                let dh = dz * self.w2[h] * a[h] * (1.0 - a[h]);
                gb1[h] += dh;
                for (g, xi) in gw1[h * d..(h + 1) * d].iter_mut().zip(x) {
                    *g += dh * xi;
                }
            }
        }
        let n = xs.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    /// Mean loss over raw rows of `batch`.
    pub fn loss(&self, batch: &EncodedMatrix) -> f64 {
        self.loss_and_gradient(&self.scaler.transform(batch), batch.labels()).0
    }

    /// Gradient (mean convention) and loss over raw rows of `batch`.
    pub fn gradient(&self, batch: &EncodedMatrix) -> (Vec<f64>, f64) {
        let (loss, g) = self.loss_and_gradient(&self.scaler.transform(batch), batch.labels());
        (g, loss)
    }
}

pub(super) fn train(data: &EncodedMatrix, cfg: &MlpConfig, seed: u64) -> Result<Fitted> {
    require_both_classes(data.labels())?;
    let scaler = FeatureScaler::fit(data);
    let xs = scaler.transform(data);
    let mut params = MlpParams::zeros(scaler, data.n_cols(), cfg.hidden);
    let mut rng = RandomSource::new(seed);
    let init: Vec<f64> = (0..params.n_weights()).map(|_| rng.uniform_range(-cfg.init_range, cfg.init_range)).collect();
    params.set_flat(&init);

    let mut trace = Vec::with_capacity(cfg.epochs);
    let mut warnings = Vec::new();
    let mut flat = params.flat();
    for epoch in 0..cfg.epochs {
        let (loss, grad) = params.loss_and_gradient(&xs, data.labels());
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(epoch));
        }
        trace.push(loss);
        if epoch >= LOSS_WINDOW && loss > trace[epoch - LOSS_WINDOW] {
            warnings.push(format!(
                "loss rose from {} to {} over {LOSS_WINDOW} epochs; stopped at epoch {epoch}",
                trace[epoch - LOSS_WINDOW],
                loss
            ));
            break;
        }
        for (w, g) in flat.iter_mut().zip(&grad) {
            *w -= cfg.learning_rate * g;
        }
        params.set_flat(&flat);
    }
    Ok(Fitted { params: ModelParams::Mlp(params), loss_trace: trace, warnings })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{accuracy, blobs};
    use super::super::{train_mlp, ModelParams};
    use super::*;
    use crate::ingest::EncodedMatrix;

    fn xor() -> EncodedMatrix {
        EncodedMatrix::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
        )
        .unwrap()
    }

    #[test]
    fn learns_xor() {
        let cfg = MlpConfig { hidden: 4, epochs: 5000, learning_rate: 1.0, ..MlpConfig::default() };
        let model = train_mlp(&xor(), cfg, 3).unwrap();
        assert_eq!(accuracy(&model, &xor()), 1.0);
        assert!(model.warnings.is_empty());
    }

    #[test]
    fn separable_blobs() {
        let data = blobs(40, 11);
        let model = train_mlp(&data, MlpConfig::default(), 1).unwrap();
        assert_eq!(accuracy(&model, &data), 1.0);
        let trace = &model.loss_trace;
        assert!(trace.windows(LOSS_WINDOW + 1).all(|w| w[LOSS_WINDOW] <= w[0]));
    }

    #[test]
    fn deterministic_per_seed() {
        let data = blobs(20, 4);
        let a = train_mlp(&data, MlpConfig::default(), 9).unwrap();
        let b = train_mlp(&data, MlpConfig::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_network_output_bias_gradient() {
        // p = 0.5 everywhere, so d/d(b2) = 0.5 - mean(y)
        let data = EncodedMatrix::from_rows(vec!["x".into()], &[vec![-1.0], vec![1.0]], vec![0, 1]).unwrap();
        let scaler = FeatureScaler::fit(&data);
        let p = MlpParams::zeros(scaler.clone(), 1, 3);
        let (g, _) = p.gradient(&data);
        assert_eq!(*g.last().unwrap(), 0.0);
        let skewed = EncodedMatrix::from_rows(vec!["x".into()], &[vec![-1.0], vec![1.0]], vec![1, 1]).unwrap();
        let (g, _) = p.gradient(&skewed);
        assert_eq!(*g.last().unwrap(), -0.5);
    }

    #[test]
    fn duplicated_rows_leave_mean_gradient_unchanged() {
        let data = blobs(3, 5);
        let model = train_mlp(&data, MlpConfig { epochs: 3, ..MlpConfig::default() }, 2).unwrap();
        let ModelParams::Mlp(p) = &model.params else { unreachable!() };
        let idx: Vec<usize> = (0..data.n_rows()).chain(0..data.n_rows()).collect();
        let doubled = data.select_rows(&idx);
        let (g1, _) = p.gradient(&data);
        let (g2, _) = p.gradient(&doubled);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }
}

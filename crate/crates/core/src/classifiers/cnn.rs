//! Small 2D convolutional network over the ten features laid out as a
//! 1 x 2 x 5 grid, trained with shuffled mini-batch gradient descent.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{invalid, require_both_classes, FeatureScaler, Fitted, ModelParams};
use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::math::{self, sigmoid, softplus};
use crate::sampling::RandomSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    /// Output `(channels, height, width)` for an input of shape `(c, h, w)`.
    pub fn output_shape(&self, (_, h, w): (usize, usize, usize)) -> (usize, usize, usize) {
        let out = |n: usize| (n + 2 * self.padding - self.kernel) / self.stride + 1;
        (self.out_channels, out(h), out(w))
    }

    fn n_weights(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }
}

/// Input grid `(channels, height, width)`.
pub const CNN_INPUT: (usize, usize, usize) = (1, 2, 5);
pub const CNN_CONV1: ConvSpec = ConvSpec { in_channels: 1, out_channels: 16, kernel: 3, stride: 1, padding: 1 };
pub const CNN_CONV2: ConvSpec = ConvSpec { in_channels: 16, out_channels: 8, kernel: 2, stride: 1, padding: 0 };
const HIDDEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShapeStage {
    pub layer: &'static str,
    pub shape: Vec<usize>,
}

/// Tensor shape after each layer, starting with the input.
pub fn cnn_shape_chain() -> Vec<ShapeStage> {
    let c1 = CNN_CONV1.output_shape(CNN_INPUT);
    let c2 = CNN_CONV2.output_shape(c1);
    let flat = c2.0 * c2.1 * c2.2;
    let stage = |layer, shape: &[usize]| ShapeStage { layer, shape: shape.to_vec() };
    vec![
        stage("input", &[CNN_INPUT.0, CNN_INPUT.1, CNN_INPUT.2]),
        stage("conv1", &[c1.0, c1.1, c1.2]),
        stage("conv2", &[c2.0, c2.1, c2.2]),
        stage("flatten", &[flat]),
        stage("linear1", &[HIDDEN]),
        stage("linear2", &[1]),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self { batch_size: 32, learning_rate: 0.01, epochs: 100 }
    }
}

impl CnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(invalid("batch_size", "must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(invalid("learning_rate", format!("{} must be positive", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(invalid("epochs", "need at least one epoch"));
        }
        Ok(())
    }
}

/// Offsets of each parameter block inside the flat weight vector.
struct Layout {
    c1w: usize,
    c1b: usize,
    c2w: usize,
    c2b: usize,
    f1w: usize,
    f1b: usize,
    f2w: usize,
    f2b: usize,
    total: usize,
    c1_shape: (usize, usize, usize),
    flat: usize,
}

fn layout() -> Layout {
    let c1_shape = CNN_CONV1.output_shape(CNN_INPUT);
    let c2_shape = CNN_CONV2.output_shape(c1_shape);
    let flat = c2_shape.0 * c2_shape.1 * c2_shape.2;
    let c1w = 0;
    let c1b = c1w + CNN_CONV1.n_weights();
    let c2w = c1b + CNN_CONV1.out_channels;
    let c2b = c2w + CNN_CONV2.n_weights();
    let f1w = c2b + CNN_CONV2.out_channels;
    let f1b = f1w + HIDDEN * flat;
    let f2w = f1b + HIDDEN;
    let f2b = f2w + HIDDEN;
    Layout { c1w, c1b, c2w, c2b, f1w, f1b, f2w, f2b, total: f2b + 1, c1_shape, flat }
}

fn conv_forward(
    input: &[f64],
    (ic, h, w): (usize, usize, usize),
    spec: &ConvSpec,
    weights: &[f64],
    bias: &[f64],
) -> Vec<f64> {
    let (oc, oh, ow) = spec.output_shape((ic, h, w));
    let k = spec.kernel;
    let mut out = vec![0.0; oc * oh * ow];
    for o in 0..oc {
        for y in 0..oh {
            for x in 0..ow {
                let mut s = bias[o];
                for c in 0..ic {
                    for ky in 0..k {
                        let Some(iy) = (y * spec.stride + ky).checked_sub(spec.padding).filter(|&v| v < h) else {
                            continue;
                        };
                        for kx in 0..k {
                            let Some(ix) = (x * spec.stride + kx).checked_sub(spec.padding).filter(|&v| v < w) else {
                                continue;
                            };
                            s += weights[((o * ic + c) * k + ky) * k + kx] * input[(c * h + iy) * w + ix];
                        }
                    }
                }
                out[(o * oh + y) * ow + x] = s;
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients and returns the input gradient.
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    (ic, h, w): (usize, usize, usize),
    spec: &ConvSpec,
    weights: &[f64],
    d_out: &[f64],
    g_weights: &mut [f64],
    g_bias: &mut [f64],
) -> Vec<f64> {
    let (oc, oh, ow) = spec.output_shape((ic, h, w));
    let k = spec.kernel;
    let mut d_in = vec![0.0; input.len()];
    for o in 0..oc {
        for y in 0..oh {
            for x in 0..ow {
                let g = d_out[(o * oh + y) * ow + x];
                if g == 0.0 {
                    continue;
                }
                g_bias[o] += g;
                for c in 0..ic {
                    for ky in 0..k {
                        let Some(iy) = (y * spec.stride + ky).checked_sub(spec.padding).filter(|&v| v < h) else {
                            continue;
                        };
                        for kx in 0..k {
                            let Some(ix) = (x * spec.stride + kx).checked_sub(spec.padding).filter(|&v| v < w) else {
                                continue;
                            };
                            let wi = ((o * ic + c) * k + ky) * k + kx;
                            let ii = (c * h + iy) * w + ix;
                            g_weights[wi] += g * input[ii];
                            d_in[ii] += g * weights[wi];
                        }
                    }
                }
            }
        }
    }
    d_in
}

fn dense(input: &[f64], weights: &[f64], bias: &[f64]) -> Vec<f64> {
    let n_in = input.len();
    bias.iter()
        .enumerate()
        .map(|(j, b)| b + weights[j * n_in..(j + 1) * n_in].iter().zip(input).map(|(a, x)| a * x).sum::<f64>())
        .collect()
}

fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

struct Forward {
    a1: Vec<f64>,
    a2: Vec<f64>,
    h: Vec<f64>,
    z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnParams {
    pub scaler: FeatureScaler,
    /// Flat weights: conv1 (w, b), conv2 (w, b), linear1 (w, b), linear2 (w, b);
    /// kernels are `[out][in][ky][kx]`, dense matrices `[out][in]`.
    pub weights: Vec<f64>,
}

impl CnnParams {
    pub fn n_weights() -> usize {
        layout().total
    }

    pub fn zeros(scaler: FeatureScaler) -> Self {
        Self { scaler, weights: vec![0.0; layout().total] }
    }

    fn forward(&self, x: &[f64], l: &Layout) -> Forward {
        let w = &self.weights;
        let mut a1 = conv_forward(x, CNN_INPUT, &CNN_CONV1, &w[l.c1w..l.c1b], &w[l.c1b..l.c2w]);
        relu(&mut a1);
        let mut a2 = conv_forward(&a1, l.c1_shape, &CNN_CONV2, &w[l.c2w..l.c2b], &w[l.c2b..l.f1w]);
        relu(&mut a2);
        let mut h = dense(&a2, &w[l.f1w..l.f1b], &w[l.f1b..l.f2w]);
        relu(&mut h);
        let z = dense(&h, &w[l.f2w..l.f2b], &w[l.f2b..l.total])[0];
        Forward { a1, a2, h, z }
    }

    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        let x = self.scaler.transform_row(row);
        sigmoid(self.forward(&x, &layout()).z)
    }

    /// Mean cross-entropy and its gradient over already-scaled rows.
    fn loss_and_gradient(&self, xs: &[&[f64]], ys: &[u8], l: &Layout) -> (f64, Vec<f64>) {
        let w = &self.weights;
        let mut grad = vec![0.0; l.total];
        let mut loss = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let f = self.forward(x, l);
            let y = f64::from(y);
            loss += softplus(f.z) - y * f.z;
            let dz = sigmoid(f.z) - y;

            grad[l.f2b] += dz;
            let mut dh = vec![0.0; HIDDEN];
            for j in 0..HIDDEN {
                grad[l.f2w + j] += dz * f.h[j];
                if f.h[j] > 0.0 {
                    dh[j] = dz * w[l.f2w + j];
                }
            }

            let mut da2 = vec![0.0; l.flat];
            for j in 0..HIDDEN {
                if dh[j] == 0.0 {
                    continue;
                }
                grad[l.f1b + j] += dh[j];
                for i in 0..l.flat {
                    grad[l.f1w + j * l.flat + i] += dh[j] * f.a2[i];
                    da2[i] += dh[j] * w[l.f1w + j * l.flat + i];
                }
            }
            for (d, a) in da2.iter_mut().zip(&f.a2) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }

            let (g_c2w, rest) = grad[l.c2w..l.f1w].split_at_mut(l.c2b - l.c2w);
            let mut da1 = conv_backward(&f.a1, l.c1_shape, &CNN_CONV2, &w[l.c2w..l.c2b], &da2, g_c2w, rest);
            for (d, a) in da1.iter_mut().zip(&f.a1) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
            let (g_c1w, rest) = grad[l.c1w..l.c2w].split_at_mut(l.c1b - l.c1w);
            conv_backward(x, CNN_INPUT, &CNN_CONV1, &w[l.c1w..l.c1b], &da1, g_c1w, rest);
        }
        let n = xs.len().max(1) as f64;
        grad.iter_mut().for_each(|g| *g /= n);
        (loss / n, grad)
    }

    /// Gradient (mean convention) and loss over raw rows of `batch`.
    pub fn gradient(&self, batch: &EncodedMatrix) -> (Vec<f64>, f64) {
        let xs = self.scaler.transform(batch);
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let (loss, g) = self.loss_and_gradient(&refs, batch.labels(), &layout());
        (g, loss)
    }

    pub fn loss(&self, batch: &EncodedMatrix) -> f64 {
        self.gradient(batch).1
    }
}

fn check_width(data: &EncodedMatrix) -> Result<()> {
    let want = CNN_INPUT.0 * CNN_INPUT.1 * CNN_INPUT.2;
    if data.n_cols() != want {
        return Err(Error::SchemaMismatch(format!(
            "the CNN takes exactly {want} features per row, got {}",
            data.n_cols()
        )));
    }
    Ok(())
}

pub(super) fn train(data: &EncodedMatrix, cfg: &CnnConfig, seed: u64) -> Result<Fitted> {
    check_width(data)?;
    require_both_classes(data.labels())?;
    let l = layout();
    let scaler = FeatureScaler::fit(data);
    let xs = scaler.transform(data);
    let mut rng = RandomSource::new(seed);
    let mut params = CnnParams::zeros(scaler);
    let fan_in = [
        (l.c1w, l.c2w, CNN_CONV1.in_channels * CNN_CONV1.kernel * CNN_CONV1.kernel),
        (l.c2w, l.f1w, CNN_CONV2.in_channels * CNN_CONV2.kernel * CNN_CONV2.kernel),
        (l.f1w, l.f2w, l.flat),
        (l.f2w, l.total, HIDDEN),
    ];
    for (start, end, fan) in fan_in {
        let bound = 1.0 / math::sqrt(fan as f64);
        for w in &mut params.weights[start..end] {
            *w = rng.uniform_range(-bound, bound);
        }
    }

    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    let warnings: Vec<String> = Vec::new();
    let labels = data.labels();
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = chunk.iter().map(|&i| xs[i].as_slice()).collect();
            let by: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grad) = params.loss_and_gradient(&bx, &by, &l);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            epoch_loss += loss * chunk.len() as f64;
            for (w, g) in params.weights.iter_mut().zip(&grad) {
                *w -= cfg.learning_rate * g;
            }
        }
        trace.push(epoch_loss / xs.len() as f64);
    }
    Ok(Fitted { params: ModelParams::Cnn(params), loss_trace: trace, warnings })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::accuracy;
    use super::super::train_cnn;
    use super::*;

    fn ten_feature_data(n: usize, seed: u64) -> EncodedMatrix {
        let mut rng = RandomSource::new(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let class = (i % 2) as u8;
            let shift = if class == 1 { 1.5 } else { -1.5 };
            rows.push((0..10).map(|j| if j < 3 { shift + rng.normal() } else { rng.normal() }).collect());
            labels.push(class);
        }
        let names = (0..10).map(|j| format!("f{j}")).collect();
        EncodedMatrix::from_rows(names, &rows, labels).unwrap()
    }

    #[test]
    fn shape_chain() {
        let chain = cnn_shape_chain();
        let shapes: Vec<Vec<usize>> = chain.iter().map(|s| s.shape.clone()).collect();
        assert_eq!(shapes, vec![vec![1, 2, 5], vec![16, 2, 5], vec![8, 1, 4], vec![32], vec![16], vec![1]]);
        assert_eq!(CnnParams::n_weights(), 144 + 16 + 512 + 8 + 512 + 16 + 16 + 1);
    }

    #[test]
    fn dead_network_outputs_half() {
        let data = ten_feature_data(6, 1);
        let p = CnnParams::zeros(FeatureScaler::fit(&data));
        for row in data.rows() {
            assert_eq!(p.predict_proba(row), 0.5);
        }
    }

    #[test]
    fn wrong_width_is_a_schema_error() {
        let data = super::super::testutil::blobs(10, 1);
        assert!(matches!(train_cnn(&data, CnnConfig::default(), 0), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn learns_shifted_classes() {
        let data = ten_feature_data(200, 5);
        let cfg = CnnConfig { epochs: 30, learning_rate: 0.05, ..CnnConfig::default() };
        let model = train_cnn(&data, cfg.clone(), 11).unwrap();
        assert!(accuracy(&model, &data) > 0.9);
        assert!(model.loss_trace.last().unwrap() < &model.loss_trace[0]);
        assert_eq!(model, train_cnn(&data, cfg, 11).unwrap());
    }
}

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ingest::EncodedMatrix;
use crate::math;

/// Z-scoring fitted on training rows. Constant columns get scale 1 so they
/// map to 0 instead of failing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(data: &EncodedMatrix) -> Self {
        let mut means = Vec::with_capacity(data.n_cols());
        let mut scales = Vec::with_capacity(data.n_cols());
        for j in 0..data.n_cols() {
            let col = data.column(j);
            let m = math::mean(&col);
            let sd = math::sqrt(math::sample_variance(&col));
            means.push(m);
            scales.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Self { means, scales }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, v)| (v - self.means[j]) / self.scales[j]).collect()
    }

    pub fn transform(&self, data: &EncodedMatrix) -> Vec<Vec<f64>> {
        data.rows().map(|r| self.transform_row(r)).collect()
    }
}

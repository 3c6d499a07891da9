//! Principal component analysis on z-scored features.
//!
//! Columns are standardized with their sample mean and standard deviation,
//! the sample covariance of the standardized matrix (the correlation matrix)
//! is diagonalized with [`eig_sym`], and each loading vector is oriented so
//! its largest-magnitude entry is positive.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::linalg::{eig_sym, SquareMatrix};
use crate::math::{self, invariant_mean, invariant_sum};

/// Strong-contribution cut-off for a ten-feature loading, `sqrt(1/10)` rounded
/// as usually quoted.
pub const DEFAULT_LOADING_THRESHOLD: f64 = 0.31;

/// Per-column centring and scaling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    /// Sample standard deviations (1/(n-1)).
    pub stds: Vec<f64>,
}

impl Standardization {
    pub fn fit(data: &EncodedMatrix) -> Result<Self> {
        if data.n_rows() < 2 {
            return Err(Error::TooFewRows("standardization needs at least 2 rows".into()));
        }
        let n = data.n_rows() as f64;
        let mut means = Vec::with_capacity(data.n_cols());
        let mut stds = Vec::with_capacity(data.n_cols());
        for j in 0..data.n_cols() {
            let col = data.column(j);
            let m = invariant_mean(&col);
            let mut sq: Vec<f64> = col.iter().map(|v| (v - m) * (v - m)).collect();
            let var = invariant_sum(&mut sq) / (n - 1.0);
            if !(var > 0.0) {
                return Err(Error::ZeroVariance(data.columns()[j].clone()));
            }
            means.push(m);
            stds.push(math::sqrt(var));
        }
        Ok(Self { columns: data.columns().to_vec(), means, stds })
    }

    pub fn check_schema(&self, data: &EncodedMatrix) -> Result<()> {
        if data.columns() != self.columns.as_slice() {
            return Err(Error::SchemaMismatch(format!(
                "expected columns {:?}, got {:?}",
                self.columns,
                data.columns()
            )));
        }
        Ok(())
    }

    pub fn apply_row(&self, row: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(row.iter().enumerate().map(|(j, v)| (v - self.means[j]) / self.stds[j]));
    }

    pub fn apply(&self, data: &EncodedMatrix) -> Result<EncodedMatrix> {
        self.check_schema(data)?;
        let mut values = Vec::with_capacity(data.values().len());
        let mut buf = Vec::with_capacity(data.n_cols());
        for row in data.rows() {
            self.apply_row(row, &mut buf);
            values.extend_from_slice(&buf);
        }
        data.replace_columns(self.columns.clone(), values)
    }
}

/// Standardized matrix plus the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizedMatrix {
    pub z: EncodedMatrix,
    pub params: Standardization,
}

pub fn standardize(data: &EncodedMatrix) -> Result<StandardizedMatrix> {
    let params = Standardization::fit(data)?;
    let z = params.apply(data)?;
    Ok(StandardizedMatrix { z, params })
}

/// Fitted principal component model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub standardization: Standardization,
    /// Descending, clamped at zero.
    pub eigenvalues: Vec<f64>,
    /// Feature `i`, component `k` at `(i, k)`; columns are unit vectors.
    pub loadings: SquareMatrix,
    pub explained_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn n_features(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.standardization.columns
    }

    /// Cumulative explained variance of the first `k` components.
    pub fn cumulative_ratio(&self, k: usize) -> f64 {
        self.explained_ratio.iter().take(k).sum()
    }

    pub fn loading(&self, feature: usize, component: usize) -> f64 {
        self.loadings.get(feature, component)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names().iter().position(|c| c.eq_ignore_ascii_case(name))
    }

    pub fn scree(&self) -> Vec<ScreeRow> {
        let mut cumulative = 0.0;
        self.explained_ratio
            .iter()
            .enumerate()
            .map(|(i, &ratio)| {
                cumulative += ratio;
                ScreeRow { component: i + 1, eigenvalue: self.eigenvalues[i], ratio, cumulative }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeRow {
    pub component: usize,
    pub eigenvalue: f64,
    pub ratio: f64,
    pub cumulative: f64,
}

/// Sample covariance (1/(n-1)) of already-centred columns, using
/// order-independent sums.
fn covariance(z: &EncodedMatrix) -> SquareMatrix {
    let d = z.n_cols();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| z.column(j)).collect();
    let denom = (z.n_rows() - 1) as f64;
    let mut c = SquareMatrix::zeros(d);
    let mut terms = Vec::with_capacity(z.n_rows());
    for i in 0..d {
        for j in i..d {
            terms.clear();
            terms.extend(cols[i].iter().zip(&cols[j]).map(|(a, b)| a * b));
            let v = invariant_sum(&mut terms) / denom;
            c.set(i, j, v);
            c.set(j, i, v);
        }
    }
    c
}

pub fn fit_pca(data: &EncodedMatrix) -> Result<PcaModel> {
    let StandardizedMatrix { z, params } = standardize(data)?;
    let cov = covariance(&z);
    let eig = eig_sym(&cov)?;
    let eigenvalues: Vec<f64> = eig.values.iter().map(|l| l.max(0.0)).collect();
    let total: f64 = eigenvalues.iter().sum();
    let explained_ratio = eigenvalues.iter().map(|l| l / total).collect();
    Ok(PcaModel { standardization: params, eigenvalues, loadings: eig.vectors, explained_ratio })
}

/// Absolute PC1/PC2 loadings of one feature and whether each exceeds the
/// strong-contribution threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadingRow {
    pub feature: String,
    pub pc1: f64,
    pub pc2: f64,
    pub pc1_abs: f64,
    pub pc2_abs: f64,
    pub pc1_strong: bool,
    pub pc2_strong: bool,
}

pub fn loadings_report(model: &PcaModel, threshold: f64) -> Vec<LoadingRow> {
    let second = usize::from(model.n_features() > 1);
    model
        .feature_names()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let pc1 = model.loading(i, 0);
            let pc2 = if second == 1 { model.loading(i, 1) } else { 0.0 };
            LoadingRow {
                feature: name.clone(),
                pc1,
                pc2,
                pc1_abs: pc1.abs(),
                pc2_abs: pc2.abs(),
                pc1_strong: pc1.abs() > threshold,
                pc2_strong: pc2.abs() > threshold,
            }
        })
        .collect()
}

/// Arrow of one feature in the PC1/PC2 biplot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiplotArrow {
    pub feature: String,
    pub x: f64,
    pub y: f64,
}

impl BiplotArrow {
    pub fn norm(&self) -> f64 {
        math::hypot(self.x, self.y)
    }
}

pub fn biplot_coords(model: &PcaModel) -> Vec<BiplotArrow> {
    let s1 = math::sqrt(model.eigenvalues[0]);
    let s2 = model.eigenvalues.get(1).map_or(0.0, |l| math::sqrt(*l));
    model
        .feature_names()
        .iter()
        .enumerate()
        .map(|(i, name)| BiplotArrow {
            feature: name.clone(),
            x: model.loading(i, 0) * s1,
            y: if model.n_features() > 1 { model.loading(i, 1) * s2 } else { 0.0 },
        })
        .collect()
}

/// Observation coordinates on the first `k` components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub k: usize,
    /// Row-major, `labels.len() * k`.
    pub scores: Vec<f64>,
    /// Share of each standardized observation's squared norm captured by the
    /// PC1/PC2 plane; 0 for an observation at the origin.
    pub cos2: Vec<f64>,
    pub labels: Vec<u8>,
}

impl ScoreMatrix {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.scores[i * self.k..(i + 1) * self.k]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.scores[i * self.k + c]).collect()
    }
}

pub fn transform(model: &PcaModel, data: &EncodedMatrix, k: usize) -> Result<ScoreMatrix> {
    let d = model.n_features();
    if k == 0 || k > d {
        return Err(Error::InvalidParameter { name: "k", reason: format!("{k} not in [1, {d}]") });
    }
    model.standardization.check_schema(data)?;
    let mut scores = Vec::with_capacity(data.n_rows() * k);
    let mut cos2 = Vec::with_capacity(data.n_rows());
    let mut z = Vec::with_capacity(d);
    for row in data.rows() {
        model.standardization.apply_row(row, &mut z);
        let project = |c: usize| (0..d).map(|i| z[i] * model.loading(i, c)).sum::<f64>();
        for c in 0..k {
            scores.push(project(c));
        }
        let norm2: f64 = z.iter().map(|v| v * v).sum();
        let plane: f64 = (0..d.min(2)).map(|c| { let p = project(c); p * p }).sum();
        cos2.push(if norm2 > 0.0 { (plane / norm2).clamp(0.0, 1.0) } else { 0.0 });
    }
    Ok(ScoreMatrix { k, scores, cos2, labels: data.labels().to_vec() })
}

/// Projects `data` onto the first `k` components as a matrix with columns
/// `PC1..PCk`, keeping labels and row ids.
pub fn project(model: &PcaModel, data: &EncodedMatrix, k: usize) -> Result<EncodedMatrix> {
    let s = transform(model, data, k)?;
    let columns = (1..=k).map(|c| format!("PC{c}")).collect();
    data.replace_columns(columns, s.scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_error;
    use alloc::string::ToString;
    use alloc::vec;

    fn matrix(rows: &[Vec<f64>]) -> EncodedMatrix {
        let cols = (0..rows[0].len()).map(|j| format!("f{j}")).collect();
        let labels = (0..rows.len()).map(|i| (i % 2) as u8).collect();
        EncodedMatrix::from_rows(cols, rows, labels).unwrap()
    }

    #[test]
    fn standardize_hand_case() {
        let m = matrix(&[vec![1.0], vec![2.0], vec![3.0]]);
        let s = standardize(&m).unwrap();
        assert_eq!(s.params.means, vec![2.0]);
        assert_eq!(s.params.stds, vec![1.0]);
        assert_eq!(s.z.column(0), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn standardize_is_idempotent() {
        let m = matrix(&[vec![1.0, 4.0], vec![2.5, -1.0], vec![7.0, 0.5], vec![3.0, 3.0]]);
        let once = standardize(&m).unwrap().z;
        let twice = standardize(&once).unwrap().z;
        for (a, b) in once.values().iter().zip(twice.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_column_rejected() {
        let m = matrix(&[vec![1.0, 4.0], vec![2.0, 4.0], vec![3.0, 4.0]]);
        assert_eq!(standardize(&m).unwrap_err(), Error::ZeroVariance("f1".into()));
    }

    #[test]
    fn rank_one_structure_dominates() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let t = i as f64;
                let wobble = if i % 2 == 0 { 1e-3 } else { -1e-3 };
                vec![t, 2.0 * t + wobble, -t + wobble * (i % 3) as f64]
            })
            .collect();
        let model = fit_pca(&matrix(&rows)).unwrap();
        assert!(model.explained_ratio[0] > 0.999);
        assert!(orthonormality_error(&model.loadings) < 1e-12);
        assert!((model.explained_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn origin_has_zero_cos2() {
        let m = matrix(&[vec![1.0, 0.0], vec![3.0, 2.0], vec![2.0, 4.0], vec![2.0, -2.0]]);
        let model = fit_pca(&m).unwrap();
        let centre = EncodedMatrix::from_rows(
            m.columns().to_vec(),
            &[model.standardization.means.clone()],
            vec![0],
        )
        .unwrap();
        let s = transform(&model, &centre, 2).unwrap();
        assert!(s.row(0).iter().all(|v| v.abs() < 1e-15));
        assert_eq!(s.cos2, vec![0.0]);
    }

    #[test]
    fn degenerate_second_axis() {
        // second feature is an exact copy: lambda2 = 0
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64]).collect();
        let model = fit_pca(&matrix(&rows)).unwrap();
        assert!(model.eigenvalues[1].abs() < 1e-12);
        for a in biplot_coords(&model) {
            assert!(a.y.abs() < 1e-6, "{a:?}");
        }
    }

    #[test]
    fn schema_and_k_checks() {
        let m = matrix(&[vec![1.0, 0.0], vec![3.0, 2.0], vec![2.0, 5.0]]);
        let model = fit_pca(&m).unwrap();
        assert!(matches!(transform(&model, &m, 3), Err(Error::InvalidParameter { .. })));
        let other = EncodedMatrix::from_rows(
            vec!["x".to_string(), "y".to_string()],
            &[vec![1.0, 2.0]],
            vec![1],
        )
        .unwrap();
        assert!(matches!(transform(&model, &other, 1), Err(Error::SchemaMismatch(_))));
        let p = project(&model, &m, 1).unwrap();
        assert_eq!(p.columns(), &["PC1".to_string()]);
    }
}

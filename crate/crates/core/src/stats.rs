//! Correlation, per-feature importance and CHADS2 risk scoring.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{EhrRecord, EncodedMatrix};
use crate::math::{self, invariant_mean, invariant_sum};

fn centered(values: &[f64]) -> Vec<f64> {
    let m = invariant_mean(values);
    values.iter().map(|v| v - m).collect()
}

fn centered_product_sum(a: &[f64], b: &[f64]) -> f64 {
    let mut terms: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    invariant_sum(&mut terms)
}

/// Pearson correlation of two equal-length vectors.
///
/// Sums are order independent, so permuting the paired observations leaves
/// the result bit-for-bit unchanged.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::TooFewRows("pearson needs at least 2 observations".into()));
    }
    let (cx, cy) = (centered(x), centered(y));
    let sxx = centered_product_sum(&cx, &cx);
    let syy = centered_product_sum(&cy, &cy);
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("x".into()));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("y".into()));
    }
    let r = centered_product_sum(&cx, &cy) / math::sqrt(sxx * syy);
    Ok(r.clamp(-1.0, 1.0))
}

/// Symmetric matrix of pairwise Pearson coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    /// Row-major, `names.len()` squared entries.
    pub values: Vec<f64>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim() + j]
    }

    pub fn by_name(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n.eq_ignore_ascii_case(a))?;
        let j = self.names.iter().position(|n| n.eq_ignore_ascii_case(b))?;
        Some(self.get(i, j))
    }
}

pub fn correlation_matrix(data: &EncodedMatrix) -> Result<CorrelationMatrix> {
    if data.n_rows() < 2 {
        return Err(Error::TooFewRows("correlation needs at least 2 rows".into()));
    }
    let d = data.n_cols();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| centered(&data.column(j))).collect();
    let mut norms = Vec::with_capacity(d);
    for (j, c) in cols.iter().enumerate() {
        let ss = centered_product_sum(c, c);
        if ss == 0.0 {
            return Err(Error::ZeroVariance(data.columns()[j].clone()));
        }
        norms.push(math::sqrt(ss));
    }
    let mut values = alloc::vec![0.0; d * d];
    for i in 0..d {
        values[i * d + i] = 1.0;
        for j in i + 1..d {
            let r = (centered_product_sum(&cols[i], &cols[j]) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[i * d + j] = r;
            values[j * d + i] = r;
        }
    }
    Ok(CorrelationMatrix { names: data.columns().to_vec(), values })
}

/// Midranks (1-based, ties share their average rank).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = alloc::vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = avg;
        }
        start = end;
    }
    ranks
}

/// Area under the ROC curve of `scores` against binary `labels` via the
/// Mann-Whitney rank statistic.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub feature: String,
    /// Raw AUC of the feature against the label.
    pub auc: f64,
    /// `max(auc, 1 - auc)`, in `[0.5, 1]`.
    pub score: f64,
    /// 1 is most important.
    pub rank: usize,
}

/// Features ordered by decreasing importance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub entries: Vec<ImportanceEntry>,
}

impl ImportanceRanking {
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.entries.iter().find(|e| e.feature.eq_ignore_ascii_case(feature)).map(|e| e.rank)
    }

    pub fn top(&self, k: usize) -> Vec<&str> {
        self.entries.iter().take(k).map(|e| e.feature.as_str()).collect()
    }
}

/// Model-free importance: folded ROC-AUC of each column against the label.
/// Ties keep column order.
pub fn auc_importance(data: &EncodedMatrix) -> Result<ImportanceRanking> {
    if data.n_rows() < 2 {
        return Err(Error::TooFewRows("importance needs at least 2 rows".into()));
    }
    let mut entries = Vec::with_capacity(data.n_cols());
    for j in 0..data.n_cols() {
        let auc = roc_auc(&data.column(j), data.labels())?;
        entries.push(ImportanceEntry {
            feature: data.columns()[j].clone(),
            auc,
            score: auc.max(1.0 - auc),
            rank: 0,
        });
    }
    // stable sort keeps column order among equal scores
    entries.sort_by(|a, b| b.score.total_cmp(&a.score));
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
    }
    Ok(ImportanceRanking { entries })
}

/// Thresholds for the schema-available CHADS2 components.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Chads2Config {
    /// Age at or above which the age point is given.
    pub elderly_age: f64,
    /// Glucose (mg/dL) at or above which the diabetes point is given.
    pub diabetes_glucose: f64,
}

impl Default for Chads2Config {
    fn default() -> Self {
        Self { elderly_age: 75.0, diabetes_glucose: 200.0 }
    }
}

/// Individual CHADS2 points for one record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chads2Components {
    pub heart_failure: u8,
    pub hypertension: u8,
    pub age: u8,
    pub diabetes: u8,
    /// Prior stroke/TIA is not recorded separately from the target, so this
    /// is always 0.
    pub prior_stroke: u8,
}

impl Chads2Components {
    pub fn total(&self) -> u8 {
        self.heart_failure + self.hypertension + self.age + self.diabetes + self.prior_stroke
    }
}

pub fn chads2_components(record: &EhrRecord, config: &Chads2Config) -> Chads2Components {
    Chads2Components {
        heart_failure: record.heart_disease.min(1),
        hypertension: record.hypertension.min(1),
        age: u8::from(record.age >= config.elderly_age),
        diabetes: u8::from(record.avg_glucose_level >= config.diabetes_glucose),
        prior_stroke: 0,
    }
}

pub fn chads2_score(record: &EhrRecord, config: &Chads2Config) -> u8 {
    chads2_components(record, config).total()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chads2Result {
    pub scores: Vec<u8>,
    /// Records per attained score.
    pub histogram: BTreeMap<u8, usize>,
    /// Stroke-positive records per attained score.
    pub stroke_counts: BTreeMap<u8, usize>,
    /// `stroke_counts / histogram` per attained score.
    pub stroke_proportion: BTreeMap<u8, f64>,
    /// Whether the proportion never decreases as the score grows.
    pub proportion_non_decreasing: bool,
}

pub fn chads2_analysis(records: &[EhrRecord], config: &Chads2Config) -> Result<Chads2Result> {
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let scores: Vec<u8> = records.iter().map(|r| chads2_score(r, config)).collect();
    let mut histogram = BTreeMap::new();
    let mut stroke_counts = BTreeMap::new();
    for (s, r) in scores.iter().zip(records) {
        *histogram.entry(*s).or_insert(0) += 1;
        *stroke_counts.entry(*s).or_insert(0) += usize::from(r.stroke);
    }
    let stroke_proportion: BTreeMap<u8, f64> = histogram
        .iter()
        .map(|(s, &n)| (*s, stroke_counts[s] as f64 / n as f64))
        .collect();
    let props: Vec<f64> = stroke_proportion.values().copied().collect();
    let proportion_non_decreasing = props.windows(2).all(|w| w[1] >= w[0]);
    Ok(Chads2Result { scores, histogram, stroke_counts, stroke_proportion, proportion_non_decreasing })
}

//! Confusion counts, the six reported rates and aggregation over runs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Counts with stroke (label 1) as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// The same counts with class 0 treated as positive.
    pub fn swapped(&self) -> Self {
        Self { tp: self.tn, fp: self.fn_, tn: self.tp, fn_: self.fp }
    }
}

pub fn confusion(predictions: &[u8], truth: &[u8]) -> Result<ConfusionMatrix> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch { left: predictions.len(), right: truth.len() });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p, t) {
            (1, 1) => cm.tp += 1,
            (1, 0) => cm.fp += 1,
            (0, 0) => cm.tn += 1,
            (0, 1) => cm.fn_ += 1,
            (bad, _) if bad > 1 => return Err(Error::InvalidLabel(bad)),
            (_, bad) => return Err(Error::InvalidLabel(bad)),
        }
    }
    Ok(cm)
}

/// How precision, recall and F-score are averaged.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsMode {
    /// Stroke class only.
    #[default]
    Positive,
    /// Unweighted mean over both classes.
    Macro,
}

impl fmt::Display for MetricsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricsMode::Positive => "positive",
            MetricsMode::Macro => "macro",
        })
    }
}

impl FromStr for MetricsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "positive" | "positive-class" | "positive_class" => Ok(MetricsMode::Positive),
            "macro" => Ok(MetricsMode::Macro),
            other => Err(Error::InvalidParameter {
                name: "metrics_mode",
                reason: alloc::format!("unknown mode {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mode: MetricsMode,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub accuracy: f64,
    pub miss_rate: f64,
    pub fallout_rate: f64,
    /// Metrics whose denominator was zero and were set to 0.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub zero_denominator: Vec<String>,
}

/// The six metric names in reporting order.
pub const METRIC_NAMES: [&str; 6] = ["precision", "recall", "f_score", "accuracy", "miss_rate", "fallout_rate"];

impl MetricsReport {
    pub fn values(&self) -> [f64; 6] {
        [self.precision, self.recall, self.f_score, self.accuracy, self.miss_rate, self.fallout_rate]
    }
}

struct Flags(Vec<String>);

impl Flags {
    fn ratio(&mut self, name: &str, num: usize, den: usize) -> f64 {
        if den == 0 {
            self.flag(name);
            0.0
        } else {
            num as f64 / den as f64
        }
    }

    fn harmonic(&mut self, name: &str, p: f64, r: f64) -> f64 {
        if p + r == 0.0 {
            self.flag(name);
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn flag(&mut self, name: &str) {
        if !self.0.iter().any(|f| f == name) {
            self.0.push(name.into());
        }
    }
}

pub fn compute_metrics(cm: &ConfusionMatrix, mode: MetricsMode) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::EmptyConfusion);
    }
    let mut flags = Flags(Vec::new());
    let recall_pos = flags.ratio("recall", cm.tp, cm.tp + cm.fn_);
    let (precision, recall) = match mode {
        MetricsMode::Positive => (flags.ratio("precision", cm.tp, cm.tp + cm.fp), recall_pos),
        MetricsMode::Macro => {
            let p_pos = flags.ratio("precision", cm.tp, cm.tp + cm.fp);
            let p_neg = flags.ratio("precision", cm.tn, cm.tn + cm.fn_);
            let r_neg = flags.ratio("recall", cm.tn, cm.tn + cm.fp);
            ((p_pos + p_neg) / 2.0, (recall_pos + r_neg) / 2.0)
        }
    };
    let f_score = flags.harmonic("f_score", precision, recall);
    let accuracy = (cm.tp + cm.tn) as f64 / cm.total() as f64;
    let miss_rate = if cm.tp + cm.fn_ == 0 {
        flags.flag("miss_rate");
        0.0
    } else {
        1.0 - recall_pos
    };
    let fallout_rate = flags.ratio("fallout_rate", cm.fp, cm.fp + cm.tn);
    Ok(MetricsReport {
        mode,
        precision,
        recall,
        f_score,
        accuracy,
        miss_rate,
        fallout_rate,
        zero_denominator: flags.0,
    })
}

/// Mean, sample variance and raw values of one metric across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub variance: f64,
    pub min: f64,
    pub max: f64,
    pub values: Vec<f64>,
}

impl MetricSummary {
    pub fn from_values(values: Vec<f64>) -> Self {
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = math::mean(&values).clamp(min, max);
        let variance = if values.len() < 2 {
            0.0
        } else {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (values.len() - 1) as f64
        };
        Self { mean, variance, min, max, values }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub mode: MetricsMode,
    /// Set when there is a single run and variances are defined as 0.
    pub single_run: bool,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
    pub f_score: MetricSummary,
    pub accuracy: MetricSummary,
    pub miss_rate: MetricSummary,
    pub fallout_rate: MetricSummary,
}

impl AggregateReport {
    pub fn summaries(&self) -> [(&'static str, &MetricSummary); 6] {
        [
            ("precision", &self.precision),
            ("recall", &self.recall),
            ("f_score", &self.f_score),
            ("accuracy", &self.accuracy),
            ("miss_rate", &self.miss_rate),
            ("fallout_rate", &self.fallout_rate),
        ]
    }
}

/// Sample mean and variance per metric, keeping raw values in input order.
pub fn aggregate(reports: &[MetricsReport]) -> Result<AggregateReport> {
    let first = reports.first().ok_or(Error::EmptyInput)?;
    let column = |k: usize| MetricSummary::from_values(reports.iter().map(|r| r.values()[k]).collect());
    Ok(AggregateReport {
        runs: reports.len(),
        mode: first.mode,
        single_run: reports.len() == 1,
        precision: column(0),
        recall: column(1),
        f_score: column(2),
        accuracy: column(3),
        miss_rate: column(4),
        fallout_rate: column(5),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

pub const DEFAULT_BIN_WIDTH: f64 = 0.02;

/// Fixed-width bins covering `[0, 1]`; the value 1.0 falls in the last bin.
pub fn histogram(values: &[f64], bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "bin_width",
            reason: alloc::format!("{bin_width} not in (0, 1]"),
        });
    }
    let n_bins = libm::ceil(1.0 / bin_width - 1e-9) as usize;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin {
            lower: i as f64 * bin_width,
            upper: ((i + 1) as f64 * bin_width).min(1.0),
            count: 0,
        })
        .collect();
    for &v in values {
        // nudge so values on a bin edge land in the upper bin despite rounding
        let idx = (math::floor(v.clamp(0.0, 1.0) / bin_width + 1e-9) as usize).min(n_bins - 1);
        bins[idx].count += 1;
    }
    Ok(bins)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-3
    }

    #[test]
    fn confusion_counts() {
        let cm = confusion(&[1, 1, 0, 0], &[1, 0, 0, 1]).unwrap();
        assert_eq!(cm, ConfusionMatrix { tp: 1, fp: 1, tn: 1, fn_: 1 });
        let truth = [1, 0, 1, 1, 0];
        let perfect = confusion(&truth, &truth).unwrap();
        assert_eq!((perfect.fp, perfect.fn_), (0, 0));
        let inverted: Vec<u8> = truth.iter().map(|t| 1 - t).collect();
        let inv = confusion(&inverted, &truth).unwrap();
        assert_eq!((inv.tp, inv.tn), (0, 0));
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(confusion(&[1], &[1, 0]), Err(Error::LengthMismatch { .. })));
        assert_eq!(confusion(&[2], &[1]), Err(Error::InvalidLabel(2)));
        assert_eq!(confusion(&[1], &[3]), Err(Error::InvalidLabel(3)));
        assert_eq!(confusion(&[], &[]), Err(Error::EmptyInput));
    }

    #[test]
    fn hand_arithmetic_example() {
        let cm = ConfusionMatrix { tp: 50, fn_: 10, fp: 20, tn: 20 };
        let m = compute_metrics(&cm, MetricsMode::Positive).unwrap();
        assert!(approx(m.recall, 0.833));
        assert!(approx(m.miss_rate, 0.167));
        assert!(approx(m.precision, 0.714));
        assert_eq!(m.fallout_rate, 0.5);
        assert_eq!(m.accuracy, 0.7);
        assert!(m.zero_denominator.is_empty());
    }

    #[test]
    fn perfect_classifier() {
        let cm = ConfusionMatrix { tp: 5, fn_: 0, fp: 0, tn: 7 };
        for mode in [MetricsMode::Positive, MetricsMode::Macro] {
            let m = compute_metrics(&cm, mode).unwrap();
            assert_eq!((m.accuracy, m.miss_rate, m.fallout_rate), (1.0, 0.0, 0.0));
        }
    }

    #[test]
    fn zero_denominator_is_flagged() {
        let cm = ConfusionMatrix { tp: 0, fp: 0, tn: 4, fn_: 3 };
        let m = compute_metrics(&cm, MetricsMode::Positive).unwrap();
        assert_eq!(m.precision, 0.0);
        assert!(m.zero_denominator.iter().any(|f| f == "precision"));
        assert_eq!(compute_metrics(&ConfusionMatrix::default(), MetricsMode::Positive), Err(Error::EmptyConfusion));
    }

    #[test]
    fn macro_mode_averages_classes() {
        let cm = ConfusionMatrix { tp: 50, fn_: 10, fp: 20, tn: 20 };
        let m = compute_metrics(&cm, MetricsMode::Macro).unwrap();
        let p = (50.0 / 70.0 + 20.0 / 30.0) / 2.0;
        let r = (50.0 / 60.0 + 20.0 / 40.0) / 2.0;
        assert!((m.precision - p).abs() < 1e-15);
        assert!((m.recall - r).abs() < 1e-15);
        assert!((m.f_score - 2.0 * p * r / (p + r)).abs() < 1e-15);
        assert_eq!(m.miss_rate, 1.0 - 50.0 / 60.0);
    }

    #[test]
    fn aggregate_examples() {
        let base = compute_metrics(&ConfusionMatrix { tp: 3, fn_: 1, fp: 1, tn: 5 }, MetricsMode::Positive).unwrap();
        let same = aggregate(&[base.clone(), base.clone(), base.clone()]).unwrap();
        assert_eq!(same.accuracy.variance, 0.0);
        assert_eq!(same.accuracy.mean, base.accuracy);

        let mut a = base.clone();
        a.accuracy = 0.7;
        let mut b = base.clone();
        b.accuracy = 0.8;
        let agg = aggregate(&[a, b]).unwrap();
        assert!((agg.accuracy.mean - 0.75).abs() < 1e-15);
        assert!((agg.accuracy.variance - 0.005).abs() < 1e-15);
        assert_eq!(agg.accuracy.values, vec![0.7, 0.8]);

        let one = aggregate(&[base.clone()]).unwrap();
        assert!(one.single_run);
        assert_eq!(one.recall.variance, 0.0);
        assert_eq!(one.recall.mean, base.recall);
        assert_eq!(aggregate(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn histogram_bins() {
        let bins = histogram(&[0.0, 0.01, 0.75, 0.76, 1.0], DEFAULT_BIN_WIDTH).unwrap();
        assert_eq!(bins.len(), 50);
        assert_eq!(bins[0].count, 2);
        assert_eq!(bins[37].count, 1);
        assert_eq!(bins[38].count, 1);
        assert_eq!(bins[49].count, 1);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 5);
        assert!(histogram(&[0.5], 0.0).is_err());
    }
}

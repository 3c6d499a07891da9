//! Deterministic artifact writers. Nothing written here depends on the clock
//! or on thread scheduling.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use stroke_core::experiments::{AblationResult, BenchmarkResult};
use stroke_core::metrics::{histogram, HistogramBin};
use stroke_core::pca::{biplot_coords, loadings_report, transform, PcaModel};
use stroke_core::stats::{Chads2Result, CorrelationMatrix, ImportanceRanking};
use stroke_core::{EncodedMatrix, Feature};

/// An output directory that remembers which files were written.
#[derive(Debug)]
pub struct ArtifactDir {
    root: PathBuf,
    written: Vec<String>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.root.join(name);
        let file = File::create(&path).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.open(name)?);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with an explicit header, for tables whose columns are data-driven.
    pub fn table(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(self.open(name)?);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn bytes(&mut self, name: &str, data: &[u8]) -> Result<()> {
        let mut w = self.open(name)?;
        w.write_all(data)?;
        w.flush()?;
        Ok(())
    }
}

pub fn write_correlation(dir: &mut ArtifactDir, m: &CorrelationMatrix) -> Result<()> {
    let mut header = vec!["feature".to_string()];
    header.extend(m.names.iter().cloned());
    let rows: Vec<Vec<String>> = (0..m.dim())
        .map(|i| {
            let mut row = vec![m.names[i].clone()];
            row.extend((0..m.dim()).map(|j| m.get(i, j).to_string()));
            row
        })
        .collect();
    dir.table("correlation.csv", &header, &rows)
}

#[derive(Serialize)]
struct ImportanceRow<'a> {
    rank: usize,
    feature: &'a str,
    code: &'a str,
    auc: f64,
    score: f64,
}

pub fn write_importance(dir: &mut ArtifactDir, ranking: &ImportanceRanking) -> Result<()> {
    let rows = ranking.entries.iter().map(|e| ImportanceRow {
        rank: e.rank,
        feature: &e.feature,
        code: e.feature.parse::<Feature>().map(Feature::code).unwrap_or(""),
        auc: e.auc,
        score: e.score,
    });
    dir.csv("importance.csv", rows)
}

#[derive(Serialize)]
struct Chads2Row {
    score: u8,
    patients: usize,
    strokes: usize,
    stroke_proportion: f64,
}

pub fn write_chads2(dir: &mut ArtifactDir, result: &Chads2Result) -> Result<()> {
    let rows = result.histogram.iter().map(|(&score, &patients)| Chads2Row {
        score,
        patients,
        strokes: result.stroke_counts[&score],
        stroke_proportion: result.stroke_proportion[&score],
    });
    dir.csv("chads2.csv", rows)?;
    dir.json(
        "chads2_summary.json",
        &serde_json::json!({
            "patients": result.scores.len(),
            "proportion_non_decreasing": result.proportion_non_decreasing,
        }),
    )
}

#[derive(Serialize)]
struct ScoreRow {
    row_id: usize,
    pc1: f64,
    pc2: f64,
    cos2: f64,
    label: u8,
}

#[derive(Serialize)]
struct BiplotRow<'a> {
    feature: &'a str,
    x: f64,
    y: f64,
    norm: f64,
}

/// scree.csv, loadings.csv, components.csv, biplot.csv and scores.csv.
pub fn write_pca(dir: &mut ArtifactDir, model: &PcaModel, data: &EncodedMatrix, threshold: f64) -> Result<()> {
    dir.csv("scree.csv", model.scree())?;
    dir.csv("loadings.csv", loadings_report(model, threshold))?;

    let d = model.n_features();
    let mut header = vec!["feature".to_string()];
    header.extend((1..=d).map(|c| format!("PC{c}")));
    let rows: Vec<Vec<String>> = model
        .feature_names()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut row = vec![name.clone()];
            row.extend((0..d).map(|c| model.loading(i, c).to_string()));
            row
        })
        .collect();
    dir.table("components.csv", &header, &rows)?;

    let arrows = biplot_coords(model);
    dir.csv("biplot.csv", arrows.iter().map(|a| BiplotRow { feature: &a.feature, x: a.x, y: a.y, norm: a.norm() }))?;

    let k = d.min(2);
    let scores = transform(model, data, k)?;
    let rows = (0..scores.n_rows()).map(|i| ScoreRow {
        row_id: data.row_ids()[i],
        pc1: scores.row(i)[0],
        pc2: if k > 1 { scores.row(i)[1] } else { 0.0 },
        cos2: scores.cos2[i],
        label: scores.labels[i],
    });
    dir.csv("scores.csv", rows)
}

#[derive(Serialize)]
struct RunRow<'a> {
    run: usize,
    seed: u64,
    precision: f64,
    recall: f64,
    f_score: f64,
    accuracy: f64,
    miss_rate: f64,
    fallout_rate: f64,
    zero_denominator: &'a str,
}

#[derive(Serialize)]
struct HistogramRow {
    metric: &'static str,
    lower: f64,
    upper: f64,
    count: usize,
}

fn histogram_rows(metric: &'static str, bins: Vec<HistogramBin>) -> impl Iterator<Item = HistogramRow> {
    bins.into_iter().map(move |b| HistogramRow { metric, lower: b.lower, upper: b.upper, count: b.count })
}

/// metrics.csv, aggregate.json and histogram.csv.
pub fn write_benchmark(dir: &mut ArtifactDir, result: &BenchmarkResult, bin_width: f64) -> Result<()> {
    let flags: Vec<String> = result.runs.iter().map(|r| r.metrics.zero_denominator.join(";")).collect();
    let rows = result.runs.iter().zip(&flags).map(|(r, f)| RunRow {
        run: r.index,
        seed: r.seed,
        precision: r.metrics.precision,
        recall: r.metrics.recall,
        f_score: r.metrics.f_score,
        accuracy: r.metrics.accuracy,
        miss_rate: r.metrics.miss_rate,
        fallout_rate: r.metrics.fallout_rate,
        zero_denominator: f,
    });
    dir.csv("metrics.csv", rows)?;

    let agg = &result.aggregate;
    let summary: serde_json::Map<String, serde_json::Value> = agg
        .summaries()
        .iter()
        .map(|(name, s)| {
            (
                name.to_string(),
                serde_json::json!({ "mean": s.mean, "variance": s.variance, "min": s.min, "max": s.max }),
            )
        })
        .collect();
    dir.json(
        "aggregate.json",
        &serde_json::json!({
            "runs": agg.runs,
            "metrics_mode": agg.mode,
            "single_run": agg.single_run,
            "model": result.config.model,
            "feature_set": result.config.feature_set.to_string(),
            "metrics": summary,
        }),
    )?;

    let mut hist = Vec::new();
    for (name, s) in agg.summaries() {
        if name == "accuracy" || name == "miss_rate" {
            hist.extend(histogram_rows(name, histogram(&s.values, bin_width)?));
        }
    }
    dir.csv("histogram.csv", hist)
}

#[derive(Serialize)]
struct AblationRunRow<'a> {
    kind: &'a str,
    stage: usize,
    label: &'a str,
    run: usize,
    seed: u64,
    accuracy: f64,
    miss_rate: f64,
    precision: f64,
    recall: f64,
    f_score: f64,
    fallout_rate: f64,
}

#[derive(Serialize)]
struct AblationSummaryRow<'a> {
    kind: &'a str,
    stage: usize,
    label: &'a str,
    features: String,
    accuracy_mean: f64,
    accuracy_variance: f64,
    miss_rate_mean: f64,
    miss_rate_variance: f64,
}

fn kind_name(r: &AblationResult) -> &'static str {
    match r.kind {
        stroke_core::experiments::AblationKind::Add => "add",
        stroke_core::experiments::AblationKind::Remove => "remove",
    }
}

/// ablation_runs.csv (per-run values for box plots) and ablation_summary.csv.
pub fn write_ablation(dir: &mut ArtifactDir, results: &[AblationResult]) -> Result<()> {
    let mut runs = Vec::new();
    let mut summary = Vec::new();
    for r in results {
        let kind = kind_name(r);
        for (i, st) in r.stages.iter().enumerate() {
            for run in &st.result.runs {
                let m = &run.metrics;
                runs.push(AblationRunRow {
                    kind,
                    stage: i,
                    label: &st.label,
                    run: run.index,
                    seed: run.seed,
                    accuracy: m.accuracy,
                    miss_rate: m.miss_rate,
                    precision: m.precision,
                    recall: m.recall,
                    f_score: m.f_score,
                    fallout_rate: m.fallout_rate,
                });
            }
            let agg = &st.result.aggregate;
            summary.push(AblationSummaryRow {
                kind,
                stage: i,
                label: &st.label,
                features: st.features.iter().map(|f| f.code()).collect::<Vec<_>>().join(";"),
                accuracy_mean: agg.accuracy.mean,
                accuracy_variance: agg.accuracy.variance,
                miss_rate_mean: agg.miss_rate.mean,
                miss_rate_variance: agg.miss_rate.variance,
            });
        }
    }
    dir.csv("ablation_runs.csv", runs)?;
    dir.csv("ablation_summary.csv", summary)
}

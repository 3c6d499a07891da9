//! Repeated-holdout benchmarks and feature ablations.
//!
//! A run is a pure function of the experiment configuration and its run seed:
//! balanced downsampling, stratified split, feature selection or PCA
//! projection, training, prediction on the held-out rows and metrics. Run
//! seeds come from [`derive_run_seeds`], and results are always aggregated in
//! run-index order, so execution order never changes the output.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{predict, train, Family, ModelSpec, DEFAULT_THRESHOLD};
use crate::error::{Error, Result};
use crate::feature::Feature;
use crate::ingest::EncodedMatrix;
use crate::metrics::{aggregate, compute_metrics, confusion, AggregateReport, MetricsMode, MetricsReport};
use crate::pca::{fit_pca, project, PcaModel};
use crate::sampling::{balanced_downsample, derive_run_seeds, split, SplitSpec};
use crate::stats::ImportanceRanking;

/// Input columns of a benchmark.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSet {
    #[default]
    All,
    TopFour,
    Custom { features: Vec<Feature> },
    /// First `k` principal components of all ten standardized features.
    PrincipalComponents { k: usize, train_fold_only: bool },
}

impl FeatureSet {
    pub fn validate(&self) -> Result<()> {
        match self {
            FeatureSet::Custom { features } => {
                if features.is_empty() {
                    return Err(Error::InvalidParameter { name: "features", reason: "empty feature list".into() });
                }
                for (i, f) in features.iter().enumerate() {
                    if features[..i].contains(f) {
                        return Err(Error::InvalidParameter { name: "features", reason: format!("{f} listed twice") });
                    }
                }
                Ok(())
            }
            FeatureSet::PrincipalComponents { k, .. } if !(1..=Feature::COUNT).contains(k) => Err(
                Error::InvalidParameter { name: "features", reason: format!("pc:{k} is outside 1..={}", Feature::COUNT) },
            ),
            _ => Ok(()),
        }
    }

    /// Raw features the set is built from.
    pub fn base_features(&self) -> Vec<Feature> {
        match self {
            FeatureSet::All | FeatureSet::PrincipalComponents { .. } => Feature::ALL.to_vec(),
            FeatureSet::TopFour => Feature::TOP_FOUR.to_vec(),
            FeatureSet::Custom { features } => features.clone(),
        }
    }

    /// Number of columns the model will see.
    pub fn width(&self) -> usize {
        match self {
            FeatureSet::PrincipalComponents { k, .. } => *k,
            other => other.base_features().len(),
        }
    }
}

/// `all`, `top4`, `custom:a,hd,ag` or `pc:<k>` (PCA fitted on the train fold).
impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let lower = s.to_ascii_lowercase();
        let bad = || Error::InvalidParameter { name: "features", reason: format!("cannot parse {s:?}") };
        let set = if lower == "all" {
            FeatureSet::All
        } else if lower == "top4" || lower == "top_four" {
            FeatureSet::TopFour
        } else if let Some(list) = lower.strip_prefix("custom:") {
            let features = list.split(',').map(|t| t.trim().parse::<Feature>()).collect::<Result<Vec<_>>>()?;
            FeatureSet::Custom { features }
        } else if let Some(k) = lower.strip_prefix("pc:") {
            FeatureSet::PrincipalComponents { k: k.trim().parse().map_err(|_| bad())?, train_fold_only: true }
        } else {
            return Err(bad());
        };
        set.validate()?;
        Ok(set)
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSet::All => f.write_str("all"),
            FeatureSet::TopFour => f.write_str("top4"),
            FeatureSet::Custom { features } => {
                f.write_str("custom:")?;
                for (i, feat) in features.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    f.write_str(feat.code())?;
                }
                Ok(())
            }
            FeatureSet::PrincipalComponents { k, .. } => write!(f, "pc:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub feature_set: FeatureSet,
    pub model: ModelSpec,
    pub runs: usize,
    pub master_seed: u64,
    /// Split parameters; the seed field is replaced per run.
    pub split: SplitSpec,
    pub metrics_mode: MetricsMode,
    /// Downsample the majority class to the minority size in every run.
    pub balanced: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            feature_set: FeatureSet::All,
            model: ModelSpec::default_for(Family::Mlp),
            runs: 100,
            master_seed: 42,
            split: SplitSpec::default(),
            metrics_mode: MetricsMode::Positive,
            balanced: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::InvalidParameter { name: "runs", reason: "need at least one run".into() });
        }
        self.feature_set.validate()?;
        self.split.validate()?;
        self.model.validate()
    }
}

/// Train and test matrices of one run, after feature selection or projection.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRun {
    pub train: EncodedMatrix,
    pub test: EncodedMatrix,
    /// PCA used for the projection, when the feature set is principal components.
    pub projection: Option<PcaModel>,
    pub model_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub index: usize,
    pub seed: u64,
    pub metrics: MetricsReport,
    /// Columns the trained model consumed.
    pub model_columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub config: ExperimentConfig,
    pub runs: Vec<RunOutcome>,
    pub aggregate: AggregateReport,
}

/// Maps `job` over `0..n`, returning results in index order.
pub trait RunExecutor {
    fn map<T: Send>(&self, n: usize, job: &(dyn Fn(usize) -> T + Sync)) -> Vec<T>;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl RunExecutor for Sequential {
    fn map<T: Send>(&self, n: usize, job: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        (0..n).map(job).collect()
    }
}

/// A configuration bound to a dataset.
#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    config: ExperimentConfig,
    data: &'a EncodedMatrix,
    global_pca: Option<PcaModel>,
}

impl<'a> Experiment<'a> {
    pub fn new(config: ExperimentConfig, data: &'a EncodedMatrix) -> Result<Self> {
        config.validate()?;
        if data.n_rows() == 0 {
            return Err(Error::EmptyInput);
        }
        for f in config.feature_set.base_features() {
            if data.column_index(f.column_name()).is_none() {
                return Err(Error::SchemaMismatch(format!("column {f} not present")));
            }
        }
        let global_pca = match config.feature_set {
            FeatureSet::PrincipalComponents { train_fold_only: false, .. } => {
                Some(fit_pca(&data.select_features(&Feature::ALL)?)?)
            }
            _ => None,
        };
        Ok(Self { config, data, global_pca })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn run_seeds(&self) -> Vec<u64> {
        derive_run_seeds(self.config.master_seed, self.config.runs)
    }

    /// Everything up to (not including) training for the run with `seed`.
    pub fn prepare_run(&self, seed: u64) -> Result<PreparedRun> {
        let sub = derive_run_seeds(seed, 3);
        let working = if self.config.balanced {
            balanced_downsample(self.data, sub[0])?
        } else {
            self.data.clone()
        };
        let (train, test) = split(&working, &SplitSpec { seed: sub[1], ..self.config.split })?;
        let base = self.config.feature_set.base_features();
        let (train, test) = (train.select_features(&base)?, test.select_features(&base)?);
        let model_seed = sub[2] ^ self.config.model.seed;
        match &self.config.feature_set {
            FeatureSet::PrincipalComponents { k, train_fold_only } => {
                let model = if *train_fold_only {
                    fit_pca(&train)?
                } else {
                    self.global_pca.clone().expect("global PCA fitted in Experiment::new")
                };
                Ok(PreparedRun {
                    train: project(&model, &train, *k)?,
                    test: project(&model, &test, *k)?,
                    projection: Some(model),
                    model_seed,
                })
            }
            _ => Ok(PreparedRun { train, test, projection: None, model_seed }),
        }
    }

    /// One complete run. `index` is only recorded.
    pub fn run_single(&self, index: usize, seed: u64) -> Result<RunOutcome> {
        let prepared = self.prepare_run(seed)?;
        let spec = ModelSpec { seed: prepared.model_seed, ..self.config.model.clone() };
        let model = train(&spec, &prepared.train)?;
        let prediction = predict(&model, &prepared.test, DEFAULT_THRESHOLD)?;
        let cm = confusion(&prediction.labels, prepared.test.labels())?;
        Ok(RunOutcome {
            index,
            seed,
            metrics: compute_metrics(&cm, self.config.metrics_mode)?,
            model_columns: model.schema,
        })
    }

    pub fn run_benchmark(&self, executor: &impl RunExecutor) -> Result<BenchmarkResult> {
        let seeds = self.run_seeds();
        let outcomes = executor.map(seeds.len(), &|i| self.run_single(i, seeds[i]));
        let runs = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
        let reports: Vec<MetricsReport> = runs.iter().map(|r| r.metrics.clone()).collect();
        Ok(BenchmarkResult { config: self.config.clone(), runs, aggregate: aggregate(&reports)? })
    }
}

/// Convenience wrapper around [`Experiment::run_benchmark`].
pub fn run_benchmark(config: &ExperimentConfig, data: &EncodedMatrix, executor: &impl RunExecutor) -> Result<BenchmarkResult> {
    Experiment::new(config.clone(), data)?.run_benchmark(executor)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationKind {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationStage {
    pub label: String,
    pub features: Vec<Feature>,
    pub result: BenchmarkResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub kind: AblationKind,
    pub stages: Vec<AblationStage>,
}

/// Base set for the additive ablation: age, heart disease and glucose.
pub const ABLATION_BASE: [Feature; 3] = [Feature::Age, Feature::HeartDisease, Feature::AvgGlucoseLevel];

/// Feature order of an importance ranking over the ten named columns.
pub fn importance_order(ranking: &ImportanceRanking) -> Result<Vec<Feature>> {
    ranking.entries.iter().map(|e| e.feature.parse::<Feature>()).collect()
}

fn stage(
    config: &ExperimentConfig,
    data: &EncodedMatrix,
    label: String,
    features: Vec<Feature>,
    executor: &impl RunExecutor,
) -> Result<AblationStage> {
    let cfg = ExperimentConfig { feature_set: FeatureSet::Custom { features: features.clone() }, ..config.clone() };
    Ok(AblationStage { label, features, result: run_benchmark(&cfg, data, executor)? })
}

/// Starts from `base` and adds the remaining features one at a time in
/// `order`, benchmarking every stage.
pub fn ablation_add(
    config: &ExperimentConfig,
    data: &EncodedMatrix,
    base: &[Feature],
    order: &[Feature],
    executor: &impl RunExecutor,
) -> Result<AblationResult> {
    let mut current = base.to_vec();
    let additions: Vec<Feature> = order.iter().copied().filter(|f| !base.contains(f)).collect();
    if let Some(missing) = Feature::ALL.iter().find(|f| !current.contains(f) && !additions.contains(f)) {
        return Err(Error::InvalidParameter { name: "order", reason: format!("{missing} is not in the addition order") });
    }
    let label = |fs: &[Feature]| fs.iter().map(|f| f.code()).collect::<Vec<_>>().join("+");
    let mut stages = Vec::with_capacity(additions.len() + 1);
    stages.push(stage(config, data, label(&current), current.clone(), executor)?);
    for f in additions {
        current.push(f);
        stages.push(stage(config, data, format!("+{}", f.code()), current.clone(), executor)?);
    }
    Ok(AblationResult { kind: AblationKind::Add, stages })
}

/// One stage per feature, each using all features except that one.
pub fn ablation_remove(config: &ExperimentConfig, data: &EncodedMatrix, executor: &impl RunExecutor) -> Result<AblationResult> {
    let stages = Feature::ALL
        .iter()
        .map(|&drop| {
            let features: Vec<Feature> = Feature::ALL.iter().copied().filter(|&f| f != drop).collect();
            stage(config, data, format!("-{}", drop.code()), features, executor)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationResult { kind: AblationKind::Remove, stages })
}

impl AblationResult {
    pub fn labels(&self) -> Vec<String> {
        self.stages.iter().map(|s| s.label.clone()).collect()
    }
}

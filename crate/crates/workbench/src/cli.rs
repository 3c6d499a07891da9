//! The `strokebench` command line.
//!
//! Exit status: 0 on success, 1 for usage errors, 2 for data or runtime errors.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use stroke_core::classifiers::{predict, train, Family, ModelKind, ModelSpec, ModelParams, DEFAULT_THRESHOLD};
use stroke_core::experiments::{
    ablation_add, ablation_remove, importance_order, run_benchmark, AblationResult, Experiment, ExperimentConfig,
    FeatureSet, ABLATION_BASE,
};
use stroke_core::metrics::{compute_metrics, confusion, MetricsMode, DEFAULT_BIN_WIDTH};
use stroke_core::pca::{fit_pca, DEFAULT_LOADING_THRESHOLD};
use stroke_core::sampling::{balanced_downsample, derive_run_seeds, run_seed, SplitSpec};
use stroke_core::stats::{auc_importance, chads2_analysis, correlation_matrix, Chads2Config};
use stroke_core::synth::synthesize;
use stroke_core::{EhrRecord, EncodedMatrix, Feature};

use crate::config::{layer, FileConfig};
use crate::dataset::{self, Dataset};
use crate::manifest::{config_digest, sha256_hex, InputInfo, Manifest, TOOL_NAME};
use crate::output::{self, ArtifactDir};
use crate::parallel::RayonExecutor;

pub const OUTPUT_DIR_ENV: &str = "STROKEBENCH_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "strokebench-output";
const DEFAULT_SEED: u64 = 42;
const DEFAULT_RUNS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "strokebench", version, about = "Stroke prediction from EHR data: statistics, PCA and model benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Row counts, class balance, categorical levels and the BMI fill value.
    Inspect(DataArgs),
    /// Pearson correlation matrix of the ten encoded features.
    Correlate(DataArgs),
    /// Features ranked by single-feature ROC-AUC.
    Importance(DataArgs),
    /// CHADS2-style scores and stroke proportion per score.
    Chads2(Chads2Args),
    /// Principal components: scree, loadings, biplot arrows and scores.
    Pca(PcaArgs),
    /// Train one model on one balanced split and save it.
    Train(ExperimentArgs),
    /// Repeated balanced-holdout benchmark of one model and feature set.
    Benchmark(ExperimentArgs),
    /// Add-one and drop-one feature ablations.
    Ablate(AblateArgs),
    /// Write a synthetic cohort in the dataset's CSV layout.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// JSON or TOML file with defaults; flags override it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Where artifacts are written [default: strokebench-output]
    #[arg(long, value_name = "DIR", env = OUTPUT_DIR_ENV)]
    output_dir: Option<PathBuf>,
    /// Master seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent runs [default: 1]
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct DataArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Patient CSV file.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Downsample negatives to the number of positives first
    /// [default: false here; true for train, benchmark and ablate]
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    balanced: Option<bool>,
}

#[derive(Debug, Args)]
struct Chads2Args {
    #[command(flatten)]
    data: DataArgs,
    /// Age giving the age point [default: 75]
    #[arg(long)]
    elderly_age: Option<f64>,
    /// Glucose (mg/dL) giving the diabetes point [default: 200]
    #[arg(long)]
    diabetes_glucose: Option<f64>,
}

#[derive(Debug, Args)]
struct PcaArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Absolute loading above which a feature is flagged as strong [default: 0.31]
    #[arg(long)]
    loading_threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of repeated runs [default: 100]
    #[arg(long)]
    runs: Option<usize>,
    /// Share of rows used for training [default: 0.7]
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Model family: mlp, dt, rf, svm, lasso, elasticnet or cnn [default: mlp]
    #[arg(long, value_parser = clap::value_parser!(Family))]
    model: Option<Family>,
    /// all, top4, custom:<a,hd,...> or pc:<k> [default: all]
    #[arg(long, value_parser = clap::value_parser!(FeatureSet))]
    features: Option<FeatureSet>,
    /// positive or macro averaging of precision, recall and F-score [default: positive]
    #[arg(long, value_parser = clap::value_parser!(MetricsMode))]
    metrics_mode: Option<MetricsMode>,
    /// Fit PCA features on all rows instead of each training fold.
    #[arg(long)]
    pca_global: bool,
    /// Split without stratifying by class.
    #[arg(long)]
    no_stratify: bool,
    /// Histogram bin width [default: 0.02]
    #[arg(long)]
    bin_width: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AblationMode {
    Add,
    Remove,
    Both,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    experiment: ExperimentArgs,
    /// Which ablation to run
    #[arg(long, value_enum, default_value_t = AblationMode::Both)]
    mode: AblationMode,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of patients
    #[arg(long, default_value_t = 5110)]
    rows: usize,
    /// Share of stroke patients
    #[arg(long, default_value_t = 0.0487)]
    class_balance: f64,
    /// Output file name inside the output directory
    #[arg(long, default_value = "synthetic.csv")]
    file_name: String,
}

enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<dataset::DatasetError> for Failure {
    fn from(e: dataset::DatasetError) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<stroke_core::Error> for Failure {
    fn from(e: stroke_core::Error) -> Self {
        match e {
            stroke_core::Error::InvalidParameter { .. } => Failure::Usage(e.into()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow!(msg.into()))
}

type Outcome<T> = Result<T, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            eprintln!("run with --help for usage");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

/// Settings shared by every subcommand after merging flags and config file.
struct Settings {
    file: FileConfig,
    output_dir: PathBuf,
    seed: u64,
    threads: usize,
}

fn context(common: &CommonArgs) -> Outcome<Settings> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let output_dir = layer(common.output_dir.clone(), file.output_dir.clone(), PathBuf::from(DEFAULT_OUTPUT_DIR));
    let seed = layer(common.seed, file.seed, DEFAULT_SEED);
    let threads = layer(common.threads, file.threads, 1);
    if threads == 0 {
        return Err(usage("--threads must be at least 1"));
    }
    Ok(Settings { file, output_dir, seed, threads })
}

struct Loaded {
    dataset: Dataset,
    info: InputInfo,
}

fn load_input(flag: &Option<PathBuf>, ctx: &Settings) -> Outcome<Loaded> {
    let path = flag
        .clone()
        .or_else(|| ctx.file.input.clone())
        .ok_or_else(|| usage("--input is required (or set `input` in the config file)"))?;
    let bytes = fs::read(&path).with_context(|| format!("cannot read input file {}", path.display()))?;
    let records = dataset::parse_csv(bytes.as_slice()).with_context(|| format!("in {}", path.display()))?;
    let dataset = Dataset::from_records(records, &path.display().to_string())?;
    Ok(Loaded { dataset, info: InputInfo { path: path.display().to_string(), sha256: sha256_hex(&bytes) } })
}

fn maybe_balanced(data: &EncodedMatrix, balanced: bool, seed: u64) -> Outcome<EncodedMatrix> {
    if balanced {
        Ok(balanced_downsample(data, seed)?)
    } else {
        Ok(data.clone())
    }
}

fn finish(
    dir: ArtifactDir,
    command: &str,
    config: serde_json::Value,
    seed: u64,
    run_seeds: Vec<u64>,
    input: Option<InputInfo>,
    started: (String, Instant),
) -> Outcome<()> {
    let mut dir = dir;
    let manifest = Manifest {
        tool: TOOL_NAME,
        version: env!("CARGO_PKG_VERSION"),
        command: command.to_string(),
        config_digest: config_digest(&config),
        master_seed: seed,
        run_seeds,
        input,
        started_at: started.0,
        wall_time_seconds: started.1.elapsed().as_secs_f64(),
        artifacts: dir.written().to_vec(),
        config,
    };
    dir.json("manifest.json", &manifest)?;
    println!("wrote {} files to {}", dir.written().len(), dir.root().display());
    Ok(())
}

fn now() -> (String, Instant) {
    (chrono::Utc::now().to_rfc3339(), Instant::now())
}

fn dispatch(command: Command) -> Outcome<()> {
    match command {
        Command::Inspect(a) => inspect(a),
        Command::Correlate(a) => correlate(a),
        Command::Importance(a) => importance(a),
        Command::Chads2(a) => chads2(a),
        Command::Pca(a) => pca(a),
        Command::Train(a) => train_one(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Ablate(a) => ablate(a),
        Command::Synth(a) => synth(a),
    }
}

fn data_config(ctx: &Settings, balanced: bool) -> serde_json::Value {
    json!({ "seed": ctx.seed, "balanced": balanced })
}

fn inspect(a: DataArgs) -> Outcome<()> {
    let started = now();
    let ctx = context(&a.common)?;
    let loaded = load_input(&a.input, &ctx)?;
    let d = &loaded.dataset;
    let positives = d.matrix.count_positive();
    let missing_bmi = d.records.iter().filter(|r| r.bmi.is_none()).count();
    let summary = json!({
        "rows": d.matrix.n_rows(),
        "positives": positives,
        "negatives": d.matrix.n_rows() - positives,
        "balanced_rows": 2 * positives.min(d.matrix.n_rows() - positives),
        "missing_bmi": missing_bmi,
        "encoding_digest": d.encoding.digest(),
    });
    println!(
        "{} rows, {} strokes, {} without stroke, {} missing BMI",
        d.matrix.n_rows(),
        positives,
        d.matrix.n_rows() - positives,
        missing_bmi
    );
    let mut dir = ArtifactDir::create(&ctx.output_dir)?;
    dir.json("summary.json", &summary)?;
    dir.json("encoding.json", &d.encoding)?;
    finish(dir, "inspect", data_config(&ctx, false), ctx.seed, Vec::new(), Some(loaded.info), started)
}

fn correlate(a: DataArgs) -> Outcome<()> {
    let started = now();
    let ctx = context(&a.common)?;
    let balanced = layer(a.balanced, ctx.file.balanced, false);
    let loaded = load_input(&a.input, &ctx)?;
    let data = maybe_balanced(&loaded.dataset.matrix, balanced, ctx.seed)?;
    let m = correlation_matrix(&data)?;
    for (x, y) in [("age", "ever_married"), ("age", "work_type"), ("work_type", "ever_married")] {
        println!("corr({x}, {y}) = {:.3}", m.by_name(x, y).unwrap_or(f64::NAN));
    }
    let mut dir = ArtifactDir::create(&ctx.output_dir)?;
    output::write_correlation(&mut dir, &m)?;
    finish(dir, "correlate", data_config(&ctx, balanced), ctx.seed, Vec::new(), Some(loaded.info), started)
}

fn importance(a: DataArgs) -> Outcome<()> {
    let started = now();
    let ctx = context(&a.common)?;
    let balanced = layer(a.balanced, ctx.file.balanced, false);
    let loaded = load_input(&a.input, &ctx)?;
    let data = maybe_balanced(&loaded.dataset.matrix, balanced, ctx.seed)?;
    let ranking = auc_importance(&data)?;
    for e in &ranking.entries {
        println!("{:>2}. {:<18} {:.4}", e.rank, e.feature, e.score);
    }
    let mut dir = ArtifactDir::create(&ctx.output_dir)?;
    output::write_importance(&mut dir, &ranking)?;
    finish(dir, "importance", data_config(&ctx, balanced), ctx.seed, Vec::new(), Some(loaded.info), started)
}

fn chads2(a: Chads2Args) -> Outcome<()> {
    let started = now();
    let ctx = context(&a.data.common)?;
    let balanced = layer(a.data.balanced, ctx.file.balanced, false);
    let loaded = load_input(&a.data.input, &ctx)?;
    let base = ctx.file.chads2.unwrap_or_default();
    let cfg = Chads2Config {
        elderly_age: a.elderly_age.unwrap_or(base.elderly_age),
        diabetes_glucose: a.diabetes_glucose.unwrap_or(base.diabetes_glucose),
    };
    let records: Vec<EhrRecord> = if balanced {
        let m = balanced_downsample(&loaded.dataset.matrix, ctx.seed)?;
        m.row_ids().iter().map(|&i| loaded.dataset.records[i].clone()).collect()
    } else {
        loaded.dataset.records.clone()
    };
    let result = chads2_analysis(&records, &cfg)?;
    for (s, p) in &result.stroke_proportion {
        println!("score {s}: {} patients, stroke proportion {p:.4}", result.histogram[s]);
    }
    let mut dir = ArtifactDir::create(&ctx.output_dir)?;
    output::write_chads2(&mut dir, &result)?;
    let mut config = data_config(&ctx, balanced);
    config["chads2"] = serde_json::to_value(cfg).map_err(anyhow::Error::from)?;
    finish(dir, "chads2", config, ctx.seed, Vec::new(), Some(loaded.info), started)
}

fn pca(a: PcaArgs) -> Outcome<()> {
    let started = now();
    let ctx = context(&a.data.common)?;
    let balanced = layer(a.data.balanced, ctx.file.balanced, false);
    let threshold = layer(a.loading_threshold, ctx.file.loading_threshold, DEFAULT_LOADING_THRESHOLD);
    let loaded = load_input(&a.data.input, &ctx)?;
    let data = maybe_balanced(&loaded.dataset.matrix, balanced, ctx.seed)?;
    let model = fit_pca(&data)?;
    println!(
        "PC1+PC2 explain {:.1}% of the variance, PC1..PC8 {:.1}%",
        100.0 * model.cumulative_ratio(2),
        100.0 * model.cumulative_ratio(8)
    );
    let mut dir = ArtifactDir::create(&ctx.output_dir)?;
    output::write_pca(&mut dir, &model, &data, threshold)?;
    let mut config = data_config(&ctx, balanced);
    config["loading_threshold"] = json!(threshold);
    finish(dir, "pca", config, ctx.seed, Vec::new(), Some(loaded.info), started)
}

/// Experiment configuration from flags over the config file over defaults.
fn experiment_config(a: &ExperimentArgs, ctx: &Settings) -> Outcome<ExperimentConfig> {
    let file = &ctx.file;
    let kind = match (a.model, &file.model) {
        (Some(f), Some(k)) if k.family() == f => k.clone(),
        (Some(f), _) => ModelKind::default_for(f),
        (None, Some(k)) => k.clone(),
        (None, None) => ModelKind::default_for(Family::Mlp),
    };
    let mut feature_set = match (&a.features, &file.features) {
        (Some(f), _) => f.clone(),
        (None, Some(s)) => s.parse::<FeatureSet>()?,
        (None, None) => FeatureSet::All,
    };
    if let FeatureSet::PrincipalComponents { train_fold_only, .. } = &mut feature_set {
        *train_fold_only = !(a.pca_global || file.pca_global.unwrap_or(false));
    }
    let cfg = ExperimentConfig {
        feature_set,
        model: ModelSpec::new(kind, 0),
        runs: layer(a.runs, file.runs, DEFAULT_RUNS),
        master_seed: ctx.seed,
        split: SplitSpec {
            train_fraction: layer(a.train_fraction, file.train_fraction, SplitSpec::default().train_fraction),
            stratified: !a.no_stratify && file.stratified.unwrap_or(true),
            seed: 0,
        },
        metrics_mode: layer(a.metrics_mode, file.metrics_mode, MetricsMode::Positive),
        balanced: layer(a.data.balanced, file.balanced, true),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn bin_width(a: &ExperimentArgs, ctx: &Settings) -> f64 {
    layer(a.bin_width, ctx.file.bin_width, DEFAULT_BIN_WIDTH)
}

fn experiment_json(cfg: &ExperimentConfig) -> Outcome<serde_json::Value> {
    let mut v = serde_json::to_value(cfg).map_err(anyhow::Error::from)?;
    v["feature_set_label"] = json!(cfg.feature_set.to_string());
    Ok(v)
}

fn train_one(a: ExperimentArgs) -> Outcome<()> {
    let started = now();
    let ctx = context(&a.data.common)?;
    let cfg = experiment_config(&a, &ctx)?;
    let loaded = load_input(&a.data.input, &ctx)?;
    let exp = Experiment::new(cfg.clone(), &loaded.dataset.matrix)?;
    let seed = run_seed(cfg.master_seed, 0);
    let prepared = exp.prepare_run(seed)?;
    let spec = ModelSpec { seed: prepared.model_seed, ..cfg.model.clone() };
    let model = train(&spec, &prepared.train)?;
    let prediction = predict(&model, &prepared.test, DEFAULT_THRESHOLD)?;
    let metrics = compute_metrics(&confusion(&prediction.labels, prepared.test.labels())?, cfg.metrics_mode)?;
    println!("test accuracy {:.4}, miss rate {:.4}", metrics.accuracy, metrics.miss_rate);
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }

    let mut dir = ArtifactDir::create(&ctx.output_dir)?;
    dir.json("model.json", &model)?;
    dir.json("test_metrics.json", &metrics)?;
    let header: Vec<String> = ["row_id", "label", "predicted", "probability", "score"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = (0..prepared.test.n_rows())
        .map(|i| {
            let cell = |v: &Option<Vec<f64>>| v.as_ref().map_or(String::new(), |v| v[i].to_string());
            vec![
                prepared.test.row_ids()[i].to_string(),
                prepared.test.labels()[i].to_string(),
                prediction.labels[i].to_string(),
                cell(&prediction.probabilities),
                cell(&prediction.scores),
            ]
        })
        .collect();
    dir.table("predictions.csv", &header, &rows)?;
    if let ModelParams::Mlp(_) | ModelParams::Cnn(_) | ModelParams::Svm(_) | ModelParams::Logistic(_) = model.params {
        dir.csv("loss_trace.csv", model.loss_trace.iter().enumerate().map(|(i, l)| (i, *l)))?;
    }
    let config = experiment_json(&cfg)?;
    finish(dir, "train", config, cfg.master_seed, vec![seed], Some(loaded.info), started)
}

fn benchmark(a: ExperimentArgs) -> Outcome<()> {
    let started = now();
    let ctx = context(&a.data.common)?;
    let cfg = experiment_config(&a, &ctx)?;
    let width = bin_width(&a, &ctx);
    let loaded = load_input(&a.data.input, &ctx)?;
    let executor = RayonExecutor::new(ctx.threads).map_err(anyhow::Error::from)?;
    let result = run_benchmark(&cfg, &loaded.dataset.matrix, &executor)?;
    let agg = &result.aggregate;
    println!(
        "{} on {} over {} runs: accuracy {:.4} (variance {:.6}), miss rate {:.4}",
        cfg.model.family(),
        cfg.feature_set,
        agg.runs,
        agg.accuracy.mean,
        agg.accuracy.variance,
        agg.miss_rate.mean
    );
    let mut dir = ArtifactDir::create(&ctx.output_dir)?;
    output::write_benchmark(&mut dir, &result, width)?;
    let mut config = experiment_json(&cfg)?;
    config["bin_width"] = json!(width);
    let seeds = derive_run_seeds(cfg.master_seed, cfg.runs);
    finish(dir, "benchmark", config, cfg.master_seed, seeds, Some(loaded.info), started)
}

fn ablate(a: AblateArgs) -> Outcome<()> {
    let started = now();
    let ctx = context(&a.experiment.data.common)?;
    let cfg = experiment_config(&a.experiment, &ctx)?;
    let loaded = load_input(&a.experiment.data.input, &ctx)?;
    let data = &loaded.dataset.matrix;
    let executor = RayonExecutor::new(ctx.threads).map_err(anyhow::Error::from)?;
    let mut results: Vec<AblationResult> = Vec::new();
    let mut order: Vec<Feature> = Vec::new();
    if matches!(a.mode, AblationMode::Add | AblationMode::Both) {
        order = importance_order(&auc_importance(data)?)?;
        results.push(ablation_add(&cfg, data, &ABLATION_BASE, &order, &executor)?);
    }
    if matches!(a.mode, AblationMode::Remove | AblationMode::Both) {
        results.push(ablation_remove(&cfg, data, &executor)?);
    }
    for r in &results {
        for st in &r.stages {
            println!(
                "{:<10} accuracy {:.4}  miss rate {:.4}",
                st.label, st.result.aggregate.accuracy.mean, st.result.aggregate.miss_rate.mean
            );
        }
    }
    let mut dir = ArtifactDir::create(&ctx.output_dir)?;
    output::write_ablation(&mut dir, &results)?;
    let mut config = experiment_json(&cfg)?;
    config["mode"] = json!(format!("{:?}", a.mode).to_lowercase());
    config["addition_order"] = json!(order.iter().map(|f| f.code()).collect::<Vec<_>>());
    let seeds = derive_run_seeds(cfg.master_seed, cfg.runs);
    finish(dir, "ablate", config, cfg.master_seed, seeds, Some(loaded.info), started)
}

fn synth(a: SynthArgs) -> Outcome<()> {
    let started = now();
    let ctx = context(&a.common)?;
    if a.rows == 0 {
        return Err(usage("--rows must be at least 1"));
    }
    let records = synthesize(a.rows, a.class_balance, ctx.seed)?;
    let mut buf = Vec::new();
    dataset::write_csv(&records, &mut buf)?;
    let mut dir = ArtifactDir::create(&ctx.output_dir)?;
    dir.bytes(&a.file_name, &buf)?;
    let config = json!({ "seed": ctx.seed, "rows": a.rows, "class_balance": a.class_balance });
    finish(dir, "synth", config, ctx.seed, Vec::new(), None, started)
}

//! The seven benchmarked model families behind one train/predict interface.
//!
//! Gradient-trained families (MLP, SVM, penalized logistic regression, CNN)
//! standardize their inputs with statistics of the training rows only; the
//! fitted scaler travels with the model. Ties between classes always resolve
//! to class 0.

mod cnn;
mod forest;
mod logreg;
mod mlp;
mod scaler;
mod svm;
mod tree;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;

pub use cnn::{cnn_shape_chain, CnnConfig, CnnParams, ConvSpec, ShapeStage, CNN_CONV1, CNN_CONV2, CNN_INPUT};
pub use forest::{ForestConfig, RandomForest};
pub use logreg::{penalized_objective, soft_threshold, LogisticParams, PenaltyConfig};
pub use mlp::{MlpConfig, MlpParams};
pub use scaler::FeatureScaler;
pub use svm::{LinearSvmParams, SvmConfig};
pub use tree::{gini, DecisionTree, Node, TreeConfig};

/// Version of the serialized [`TrainedModel`] document.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Mlp,
    DecisionTree,
    RandomForest,
    LinearSvm,
    Lasso,
    ElasticNet,
    Cnn,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Mlp,
        Family::DecisionTree,
        Family::RandomForest,
        Family::LinearSvm,
        Family::Lasso,
        Family::ElasticNet,
        Family::Cnn,
    ];

    /// Short name used on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            Family::Mlp => "mlp",
            Family::DecisionTree => "dt",
            Family::RandomForest => "rf",
            Family::LinearSvm => "svm",
            Family::Lasso => "lasso",
            Family::ElasticNet => "elasticnet",
            Family::Cnn => "cnn",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Ok(match s.as_str() {
            "mlp" | "nn" => Family::Mlp,
            "dt" | "tree" | "decision_tree" => Family::DecisionTree,
            "rf" | "forest" | "random_forest" => Family::RandomForest,
            "svm" | "linear_svm" => Family::LinearSvm,
            "lasso" => Family::Lasso,
            "elasticnet" | "elastic_net" => Family::ElasticNet,
            "cnn" => Family::Cnn,
            _ => {
                return Err(Error::InvalidParameter { name: "model", reason: format!("unknown model {s:?}") })
            }
        })
    }
}

/// Family plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelKind {
    Mlp(MlpConfig),
    DecisionTree(TreeConfig),
    RandomForest(ForestConfig),
    LinearSvm(SvmConfig),
    Lasso(PenaltyConfig),
    ElasticNet(PenaltyConfig),
    Cnn(CnnConfig),
}

impl ModelKind {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Mlp => ModelKind::Mlp(MlpConfig::default()),
            Family::DecisionTree => ModelKind::DecisionTree(TreeConfig::default()),
            Family::RandomForest => ModelKind::RandomForest(ForestConfig::default()),
            Family::LinearSvm => ModelKind::LinearSvm(SvmConfig::default()),
            Family::Lasso => ModelKind::Lasso(PenaltyConfig::lasso()),
            Family::ElasticNet => ModelKind::ElasticNet(PenaltyConfig::elastic_net()),
            Family::Cnn => ModelKind::Cnn(CnnConfig::default()),
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelKind::Mlp(_) => Family::Mlp,
            ModelKind::DecisionTree(_) => Family::DecisionTree,
            ModelKind::RandomForest(_) => Family::RandomForest,
            ModelKind::LinearSvm(_) => Family::LinearSvm,
            ModelKind::Lasso(_) => Family::Lasso,
            ModelKind::ElasticNet(_) => Family::ElasticNet,
            ModelKind::Cnn(_) => Family::Cnn,
        }
    }
}

/// Everything needed to train a model deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    #[serde(default)]
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    pub fn default_for(family: Family) -> Self {
        Self::new(ModelKind::default_for(family), 0)
    }

    pub fn family(&self) -> Family {
        self.kind.family()
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ModelKind::Mlp(c) => c.validate(),
            ModelKind::DecisionTree(c) => c.validate(),
            ModelKind::RandomForest(c) => c.validate(),
            ModelKind::LinearSvm(c) => c.validate(),
            ModelKind::Lasso(c) => {
                c.validate()?;
                if c.alpha != 1.0 {
                    return Err(Error::InvalidParameter {
                        name: "alpha",
                        reason: format!("LASSO uses alpha = 1, got {}", c.alpha),
                    });
                }
                Ok(())
            }
            ModelKind::ElasticNet(c) => c.validate(),
            ModelKind::Cnn(c) => c.validate(),
        }
    }
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}

/// Learned parameters of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ModelParams {
    Mlp(MlpParams),
    Tree(DecisionTree),
    Forest(RandomForest),
    Svm(LinearSvmParams),
    Logistic(LogisticParams),
    Cnn(CnnParams),
}

impl ModelParams {
    fn all_finite(&self) -> bool {
        match self {
            ModelParams::Mlp(p) => p.flat().iter().all(|v| v.is_finite()),
            ModelParams::Tree(t) => t.all_finite(),
            ModelParams::Forest(f) => f.trees.iter().all(DecisionTree::all_finite),
            ModelParams::Svm(p) => p.weights.iter().chain([&p.bias]).all(|v| v.is_finite()),
            ModelParams::Logistic(p) => p.weights.iter().chain([&p.intercept]).all(|v| v.is_finite()),
            ModelParams::Cnn(p) => p.weights.iter().all(|v| v.is_finite()),
        }
    }
}

/// A fitted model together with the schema it accepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub family: Family,
    pub spec: ModelSpec,
    /// Column names the model was trained on, in order.
    pub schema: Vec<String>,
    pub params: ModelParams,
    /// Training objective per epoch/iteration (empty for tree models).
    pub loss_trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl TrainedModel {
    pub fn check_schema(&self, data: &EncodedMatrix) -> Result<()> {
        if data.columns() != self.schema.as_slice() {
            return Err(Error::SchemaMismatch(format!(
                "model expects {:?}, data has {:?}",
                self.schema,
                data.columns()
            )));
        }
        Ok(())
    }
}

pub(crate) fn require_both_classes(labels: &[u8]) -> Result<()> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub(crate) struct Fitted {
    pub params: ModelParams,
    pub loss_trace: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Trains the model described by `spec` on `data`.
pub fn train(spec: &ModelSpec, data: &EncodedMatrix) -> Result<TrainedModel> {
    spec.validate()?;
    if data.n_rows() == 0 {
        return Err(Error::EmptyInput);
    }
    let fitted = match &spec.kind {
        ModelKind::Mlp(c) => mlp::train(data, c, spec.seed)?,
        ModelKind::DecisionTree(c) => tree::train(data, c)?,
        ModelKind::RandomForest(c) => forest::train(data, c, spec.seed)?,
        ModelKind::LinearSvm(c) => svm::train(data, c)?,
        ModelKind::Lasso(c) | ModelKind::ElasticNet(c) => logreg::train(data, c)?,
        ModelKind::Cnn(c) => cnn::train(data, c, spec.seed)?,
    };
    if !fitted.params.all_finite() {
        return Err(Error::NonFiniteLoss(fitted.loss_trace.len()));
    }
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        family: spec.family(),
        spec: spec.clone(),
        schema: data.columns().to_vec(),
        params: fitted.params,
        loss_trace: fitted.loss_trace,
        warnings: fitted.warnings,
    })
}

pub fn train_mlp(data: &EncodedMatrix, config: MlpConfig, seed: u64) -> Result<TrainedModel> {
    train(&ModelSpec::new(ModelKind::Mlp(config), seed), data)
}

pub fn train_decision_tree(data: &EncodedMatrix, config: TreeConfig) -> Result<TrainedModel> {
    train(&ModelSpec::new(ModelKind::DecisionTree(config), 0), data)
}

pub fn train_random_forest(data: &EncodedMatrix, config: ForestConfig, seed: u64) -> Result<TrainedModel> {
    train(&ModelSpec::new(ModelKind::RandomForest(config), seed), data)
}

pub fn train_linear_svm(data: &EncodedMatrix, config: SvmConfig) -> Result<TrainedModel> {
    train(&ModelSpec::new(ModelKind::LinearSvm(config), 0), data)
}

/// LASSO when `alpha == 1`, elastic net otherwise.
pub fn train_penalized_logreg(data: &EncodedMatrix, config: PenaltyConfig) -> Result<TrainedModel> {
    let kind = if config.alpha == 1.0 { ModelKind::Lasso(config) } else { ModelKind::ElasticNet(config) };
    train(&ModelSpec::new(kind, 0), data)
}

pub fn train_cnn(data: &EncodedMatrix, config: CnnConfig, seed: u64) -> Result<TrainedModel> {
    train(&ModelSpec::new(ModelKind::Cnn(config), seed), data)
}

/// Predicted labels, plus class-1 probabilities for families that have them.
/// For the SVM, `scores` holds the signed decision values; for forests,
/// `probabilities` holds the share of trees voting for class 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub labels: Vec<u8>,
    pub probabilities: Option<Vec<f64>>,
    pub scores: Option<Vec<f64>>,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Probability above `threshold` gives class 1 (equality stays class 0).
fn threshold_labels(p: &[f64], threshold: f64) -> Vec<u8> {
    p.iter().map(|&v| u8::from(v > threshold)).collect()
}

pub fn predict(model: &TrainedModel, data: &EncodedMatrix, threshold: f64) -> Result<Prediction> {
    model.check_schema(data)?;
    Ok(match &model.params {
        ModelParams::Mlp(p) => {
            let probs: Vec<f64> = data.rows().map(|r| p.predict_proba(r)).collect();
            Prediction { labels: threshold_labels(&probs, threshold), probabilities: Some(probs), scores: None }
        }
        ModelParams::Logistic(p) => {
            let probs: Vec<f64> = data.rows().map(|r| p.predict_proba(r)).collect();
            Prediction { labels: threshold_labels(&probs, threshold), probabilities: Some(probs), scores: None }
        }
        ModelParams::Cnn(p) => {
            let probs: Vec<f64> = data.rows().map(|r| p.predict_proba(r)).collect();
            Prediction { labels: threshold_labels(&probs, threshold), probabilities: Some(probs), scores: None }
        }
        ModelParams::Tree(t) => Prediction {
            labels: data.rows().map(|r| t.predict_row(r)).collect(),
            probabilities: None,
            scores: None,
        },
        ModelParams::Forest(f) => {
            let votes: Vec<f64> = data.rows().map(|r| f.vote_share(r)).collect();
            Prediction { labels: threshold_labels(&votes, 0.5), probabilities: Some(votes), scores: None }
        }
        ModelParams::Svm(p) => {
            let scores: Vec<f64> = data.rows().map(|r| p.decision(r)).collect();
            Prediction { labels: scores.iter().map(|&s| u8::from(s > 0.0)).collect(), probabilities: None, scores: Some(scores) }
        }
    })
}

/// Analytic gradient of the mean training loss of an MLP or CNN with respect
/// to all of its weights, evaluated on `batch`.
pub fn model_gradient(model: &TrainedModel, batch: &EncodedMatrix) -> Result<Vec<f64>> {
    model.check_schema(batch)?;
    match &model.params {
        ModelParams::Mlp(p) => Ok(p.gradient(batch).0),
        ModelParams::Cnn(p) => Ok(p.gradient(batch).0),
        _ => Err(invalid("model", format!("{} has no gradient kernel", model.family))),
    }
}

/// Gradient of the mean binary cross-entropy of an MLP.
pub fn mlp_gradient(model: &TrainedModel, batch: &EncodedMatrix) -> Result<Vec<f64>> {
    match &model.params {
        ModelParams::Mlp(_) => model_gradient(model, batch),
        _ => Err(Error::SchemaMismatch(format!("expected an MLP, got {}", model.family))),
    }
}


#[cfg(test)]
mod tests {
    use super::testutil::blobs;
    use super::*;
    use alloc::vec;

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.short_name().parse::<Family>().unwrap(), f);
            assert_eq!(ModelKind::default_for(f).family(), f);
        }
        assert!("knn".parse::<Family>().is_err());
    }

    #[test]
    fn empty_data_predicts_nothing() {
        let data = blobs(10, 1);
        let model = train(&ModelSpec::default_for(Family::DecisionTree), &data).unwrap();
        let empty = data.select_rows(&[]);
        let p = predict(&model, &empty, DEFAULT_THRESHOLD).unwrap();
        assert!(p.labels.is_empty());
    }

    #[test]
    fn schema_is_enforced() {
        let data = blobs(10, 1);
        let model = train(&ModelSpec::default_for(Family::LinearSvm), &data).unwrap();
        let other = EncodedMatrix::from_rows(vec!["a".into(), "b".into()], &[vec![0.0, 0.0]], vec![0]).unwrap();
        assert!(matches!(predict(&model, &other, 0.5), Err(Error::SchemaMismatch(_))));
        assert!(matches!(mlp_gradient(&model, &data), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn single_class_rejected_by_gradient_families() {
        let data = blobs(5, 2);
        let ones: Vec<usize> = (5..10).collect();
        let one_class = data.select_rows(&ones);
        for f in [Family::Mlp, Family::LinearSvm, Family::Lasso, Family::ElasticNet] {
            assert_eq!(train(&ModelSpec::default_for(f), &one_class).unwrap_err(), Error::SingleClass, "{f}");
        }
    }

    #[test]
    fn lasso_requires_unit_alpha() {
        let spec = ModelSpec::new(ModelKind::Lasso(PenaltyConfig { alpha: 0.5, ..PenaltyConfig::lasso() }), 0);
        assert!(matches!(spec.validate(), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn threshold_rule() {
        assert_eq!(threshold_labels(&[0.7, 0.5, 0.2], 0.5), vec![1, 0, 0]);
    }
}

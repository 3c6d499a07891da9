//! Bagged CART ensemble with per-split feature subsampling.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeConfig};
use super::{invalid, Fitted, ModelParams};
use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::math;
use crate::sampling::{derive_run_seeds, RandomSource};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features examined per split; `None` means `floor(sqrt(columns))`.
    pub max_features: Option<usize>,
    /// Train each tree on `n` rows drawn with replacement.
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self { n_trees: 200, max_depth: 12, min_samples_split: 2, max_features: None, bootstrap: true }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(invalid("n_trees", "need at least one tree"));
        }
        self.tree_config(1).validate()
    }

    fn tree_config(&self, n_cols: usize) -> TreeConfig {
        let m = self.max_features.unwrap_or_else(|| (math::floor(math::sqrt(n_cols as f64)) as usize).max(1));
        TreeConfig { max_depth: self.max_depth, min_samples_split: self.min_samples_split, max_features: Some(m) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    /// Share of trees voting for class 1.
    pub fn vote_share(&self, row: &[f64]) -> f64 {
        let ones = self.trees.iter().filter(|t| t.predict_row(row) == 1).count();
        ones as f64 / self.trees.len() as f64
    }
}

pub(super) fn train(data: &EncodedMatrix, cfg: &ForestConfig, seed: u64) -> Result<Fitted> {
    if data.n_rows() < 2 {
        return Err(Error::TooFewRows(format!("random forest needs at least 2 rows, got {}", data.n_rows())));
    }
    let tree_cfg = cfg.tree_config(data.n_cols());
    let n = data.n_rows();
    let trees = derive_run_seeds(seed, cfg.n_trees)
        .into_iter()
        .map(|tree_seed| {
            let mut rng = RandomSource::new(tree_seed);
            let sample: Vec<usize> =
                if cfg.bootstrap { (0..n).map(|_| rng.below(n)).collect() } else { (0..n).collect() };
            DecisionTree::grow(data, &sample, &tree_cfg, Some(&mut rng))
        })
        .collect();
    Ok(Fitted { params: ModelParams::Forest(RandomForest { trees }), loss_trace: Vec::new(), warnings: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{accuracy, blobs};
    use super::super::tree::Node;
    use super::super::{predict, train_decision_tree, train_random_forest};
    use super::*;

    #[test]
    fn forest_of_one_matches_cart() {
        let data = blobs(40, 13);
        let cfg = ForestConfig {
            n_trees: 1,
            max_depth: 6,
            min_samples_split: 10,
            max_features: Some(data.n_cols()),
            bootstrap: false,
        };
        let forest = train_random_forest(&data, cfg, 77).unwrap();
        let cart = train_decision_tree(&data, TreeConfig::default()).unwrap();
        let (ModelParams::Forest(f), ModelParams::Tree(t)) = (&forest.params, &cart.params) else { unreachable!() };
        assert_eq!(&f.trees[0], t);
        assert_eq!(predict(&forest, &data, 0.5).unwrap().labels, predict(&cart, &data, 0.5).unwrap().labels);
    }

    #[test]
    fn same_seed_same_forest() {
        let data = blobs(30, 3);
        let cfg = ForestConfig { n_trees: 15, ..ForestConfig::default() };
        let a = train_random_forest(&data, cfg.clone(), 5).unwrap();
        let b = train_random_forest(&data, cfg.clone(), 5).unwrap();
        let c = train_random_forest(&data, cfg, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(accuracy(&a, &data) > 0.95);
    }

    #[test]
    fn majority_vote_with_class_zero_ties() {
        let leaf = |class| DecisionTree { nodes: alloc::vec![Node::Leaf { class, counts: [1, 1] }] };
        let forest = RandomForest { trees: alloc::vec![leaf(0), leaf(0), leaf(0), leaf(1)] };
        assert_eq!(forest.vote_share(&[0.0]), 0.25);
        let tied = RandomForest { trees: alloc::vec![leaf(0), leaf(1)] };
        assert_eq!(tied.vote_share(&[0.0]), 0.5);
    }
}

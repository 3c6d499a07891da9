//! CART classification tree with Gini impurity.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{invalid, Fitted, ModelParams};
use crate::error::{Error, Result};
use crate::ingest::EncodedMatrix;
use crate::sampling::RandomSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeConfig {
    /// The root is at depth 0.
    pub max_depth: usize,
    /// Nodes with fewer rows become leaves.
    pub min_samples_split: usize,
    /// Features examined per split; `None` examines all of them.
    pub max_features: Option<usize>,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { max_depth: 6, min_samples_split: 10, max_features: None }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(invalid("min_samples_split", format!("{} < 2", self.min_samples_split)));
        }
        if self.max_features == Some(0) {
            return Err(invalid("max_features", "must be at least 1"));
        }
        Ok(())
    }
}

/// `1 - sum p_k^2` over the two classes; 0 for an empty node.
pub fn gini(counts: [usize; 2]) -> f64 {
    let n = counts[0] + counts[1];
    if n == 0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n as f64;
    let p1 = counts[1] as f64 / n as f64;
    1.0 - p0 * p0 - p1 * p1
}

fn majority(counts: [usize; 2]) -> u8 {
    u8::from(counts[1] > counts[0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        class: u8,
        counts: [usize; 2],
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Arena of nodes; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    /// Index of the leaf reached by `row`.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { class, .. } => *class,
            Node::Split { .. } => unreachable!(),
        }
    }

    /// Longest root-to-leaf path (a lone leaf has depth 0).
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn all_finite(&self) -> bool {
        self.nodes.iter().all(|n| match n {
            Node::Split { threshold, .. } => threshold.is_finite(),
            Node::Leaf { .. } => true,
        })
    }

    /// Grows a tree on the rows listed in `sample` (duplicates allowed).
    /// `rng` is consulted only when `max_features` is below the column count.
    pub(crate) fn grow(data: &EncodedMatrix, sample: &[usize], cfg: &TreeConfig, rng: Option<&mut RandomSource>) -> Self {
        let mut builder = Builder { data, cfg, rng, nodes: Vec::new() };
        let mut rows = sample.to_vec();
        builder.build(&mut rows, 0);
        DecisionTree { nodes: builder.nodes }
    }
}

struct Builder<'a> {
    data: &'a EncodedMatrix,
    cfg: &'a TreeConfig,
    rng: Option<&'a mut RandomSource>,
    nodes: Vec<Node>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> [usize; 2] {
        let pos = rows.iter().filter(|&&r| self.data.labels()[r] == 1).count();
        [rows.len() - pos, pos]
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let counts = self.counts(rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority(counts), counts });
        let parent = gini(counts);
        if depth >= self.cfg.max_depth || rows.len() < self.cfg.min_samples_split || parent == 0.0 {
            return id;
        }
        let Some(best) = self.best_split(rows, parent) else {
            return id;
        };
        let (f, t) = (best.feature, best.threshold);
        let data = self.data;
        let mut mid = 0;
        for i in 0..rows.len() {
            if data.row(rows[i])[f] <= t {
                rows.swap(i, mid);
                mid += 1;
            }
        }
        let (l, r) = rows.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[id] = Node::Split { feature: f, threshold: t, left, right };
        id
    }

    fn feature_order(&mut self) -> (Vec<usize>, usize) {
        let d = self.data.n_cols();
        let mut order: Vec<usize> = (0..d).collect();
        match (self.cfg.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                rng.shuffle(&mut order);
                (order, m)
            }
            _ => (order, d),
        }
    }

    /// Lowest weighted child impurity over the candidate features. When the
    /// first `m` sampled features admit no split, the remaining ones are
    /// examined in sampled order until one does.
    fn best_split(&mut self, rows: &[usize], parent: f64) -> Option<Candidate> {
        let (order, m) = self.feature_order();
        let mut best: Option<Candidate> = None;
        for (visited, &f) in order.iter().enumerate() {
            if visited >= m && best.is_some() {
                break;
            }
            if let Some(c) = self.best_threshold(rows, f) {
                if c.impurity < parent && best.as_ref().map_or(true, |b| c.impurity < b.impurity) {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_threshold(&self, rows: &[usize], f: usize) -> Option<Candidate> {
        let data = self.data;
        let mut pairs: Vec<(f64, u8)> = rows.iter().map(|&r| (data.row(r)[f], data.labels()[r])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let total_pos = pairs.iter().filter(|p| p.1 == 1).count();
        let mut left = [0usize; 2];
        let mut best: Option<Candidate> = None;
        for i in 0..n - 1 {
            left[usize::from(pairs[i].1)] += 1;
            let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
            if lo == hi {
                continue;
            }
            let nl = i + 1;
            let right = [n - nl - (total_pos - left[1]), total_pos - left[1]];
            let impurity = (nl as f64 * gini(left) + (n - nl) as f64 * gini(right)) / n as f64;
            if best.as_ref().map_or(true, |b| impurity < b.impurity) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Candidate { feature: f, threshold, impurity });
            }
        }
        best
    }
}

pub(super) fn train(data: &EncodedMatrix, cfg: &TreeConfig) -> Result<Fitted> {
    if data.n_rows() < 2 {
        return Err(Error::TooFewRows(format!("decision tree needs at least 2 rows, got {}", data.n_rows())));
    }
    let sample: Vec<usize> = (0..data.n_rows()).collect();
    let tree = DecisionTree::grow(data, &sample, cfg, None);
    Ok(Fitted { params: ModelParams::Tree(tree), loss_trace: Vec::new(), warnings: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{accuracy, blobs};
    use super::super::{train_decision_tree, ModelParams};
    use super::*;
    use alloc::vec;

    #[test]
    fn gini_values() {
        assert_eq!(gini([10, 0]), 0.0);
        assert_eq!(gini([0, 7]), 0.0);
        assert_eq!(gini([5, 5]), 0.5);
    }

    #[test]
    fn single_perfect_split() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 7) as f64, if i < 10 { 1.0 } else { 3.0 }]).collect();
        let labels = (0..20).map(|i| u8::from(i >= 10)).collect();
        let data = EncodedMatrix::from_rows(vec!["noise".into(), "signal".into()], &rows, labels).unwrap();
        let model = train_decision_tree(&data, TreeConfig::default()).unwrap();
        let ModelParams::Tree(t) = &model.params else { unreachable!() };
        assert_eq!(t.depth(), 1);
        assert_eq!(accuracy(&model, &data), 1.0);
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 1);
                assert_eq!(*threshold, 2.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn depth_and_tie_rules() {
        let data = blobs(30, 8);
        let cfg = TreeConfig { max_depth: 2, ..TreeConfig::default() };
        let model = train_decision_tree(&data, cfg).unwrap();
        let ModelParams::Tree(t) = &model.params else { unreachable!() };
        assert!(t.depth() <= 2);
        assert_eq!(majority([3, 3]), 0);
    }

    #[test]
    fn training_rows_land_in_consistent_leaves() {
        let data = blobs(25, 21);
        let model = train_decision_tree(&data, TreeConfig::default()).unwrap();
        let ModelParams::Tree(t) = &model.params else { unreachable!() };
        let mut routed = vec![[0usize; 2]; t.nodes.len()];
        for (row, &y) in data.rows().zip(data.labels()) {
            routed[t.leaf_index(row)][usize::from(y)] += 1;
        }
        for (i, node) in t.nodes.iter().enumerate() {
            if let Node::Leaf { class, counts } = node {
                assert_eq!(*counts, routed[i]);
                assert_eq!(*class, majority(*counts));
            }
        }
    }
}

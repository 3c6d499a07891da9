use stroke_core::classifiers::{
    penalized_objective, predict, train, train_decision_tree, train_linear_svm, train_penalized_logreg,
    train_random_forest, Family, FeatureScaler, ForestConfig, ModelParams, ModelSpec, Node, PenaltyConfig, SvmConfig,
    TreeConfig, TrainedModel, MODEL_FORMAT_VERSION,
};
use stroke_core::ingest::{encode, fit_encoding};
use stroke_core::synth::synthesize;
use stroke_core::EncodedMatrix;

fn cohort(n: usize, seed: u64) -> EncodedMatrix {
    let records = synthesize(n, 0.3, seed).unwrap();
    encode(&records, &fit_encoding(&records).unwrap()).unwrap()
}

#[test]
fn forest_of_one_equals_cart() {
    for seed in [1, 2, 3] {
        let data = cohort(300, seed);
        let tree_cfg = TreeConfig::default();
        let forest_cfg = ForestConfig {
            n_trees: 1,
            max_depth: tree_cfg.max_depth,
            min_samples_split: tree_cfg.min_samples_split,
            max_features: Some(data.n_cols()),
            bootstrap: false,
        };
        let forest = train_random_forest(&data, forest_cfg, seed).unwrap();
        let cart = train_decision_tree(&data, tree_cfg).unwrap();
        assert_eq!(predict(&forest, &data, 0.5).unwrap().labels, predict(&cart, &data, 0.5).unwrap().labels);
    }
}

#[test]
fn tree_rows_reach_consistent_leaves() {
    let data = cohort(400, 8);
    let model = train_decision_tree(&data, TreeConfig::default()).unwrap();
    let ModelParams::Tree(tree) = &model.params else { unreachable!() };
    for row in data.rows() {
        let Node::Leaf { class, counts } = &tree.nodes[tree.leaf_index(row)] else { panic!("not a leaf") };
        let majority = u8::from(counts[1] > counts[0]);
        assert_eq!(*class, majority);
        assert_eq!(tree.predict_row(row), *class);
    }
}

#[test]
fn logreg_objective_is_monotone_on_cohort() {
    let data = cohort(300, 4);
    for cfg in [PenaltyConfig::lasso(), PenaltyConfig::elastic_net()] {
        let model = train_penalized_logreg(&data, cfg.clone()).unwrap();
        assert!(model.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let ModelParams::Logistic(p) = &model.params else { unreachable!() };
        let xs = FeatureScaler::fit(&data).transform(&data);
        let obj = penalized_objective(&p.weights, p.intercept, &xs, data.labels(), &cfg);
        assert!((obj - model.loss_trace.last().unwrap()).abs() < 1e-12);
    }
}

#[test]
fn huge_penalty_zeroes_all_weights() {
    let data = cohort(200, 6);
    let model = train_penalized_logreg(&data, PenaltyConfig { lambda: 1e3, ..PenaltyConfig::elastic_net() }).unwrap();
    let ModelParams::Logistic(p) = &model.params else { unreachable!() };
    assert!(p.weights.iter().all(|&w| w == 0.0));
}

#[test]
fn svm_label_flip_flips_predictions() {
    let data = cohort(200, 12);
    let flipped = EncodedMatrix::new(
        data.columns().to_vec(),
        data.values().to_vec(),
        data.labels().iter().map(|l| 1 - l).collect(),
    )
    .unwrap();
    let a = train_linear_svm(&data, SvmConfig::default()).unwrap();
    let b = train_linear_svm(&flipped, SvmConfig::default()).unwrap();
    let sa = predict(&a, &data, 0.5).unwrap().scores.unwrap();
    let sb = predict(&b, &data, 0.5).unwrap().scores.unwrap();
    for (x, y) in sa.iter().zip(&sb) {
        assert_eq!(*x, -*y);
    }
}

#[test]
fn every_family_is_deterministic_and_serializes() {
    let data = cohort(160, 3);
    for family in Family::ALL {
        let mut spec = ModelSpec::default_for(family);
        spec.seed = 9;
        if let stroke_core::classifiers::ModelKind::RandomForest(c) = &mut spec.kind {
            c.n_trees = 10;
        }
        if let stroke_core::classifiers::ModelKind::Cnn(c) = &mut spec.kind {
            c.epochs = 5;
        }
        let a = train(&spec, &data).unwrap();
        let b = train(&spec, &data).unwrap();
        assert_eq!(a, b, "{family}");
        assert_eq!(a.format_version, MODEL_FORMAT_VERSION);
        let json = serde_json::to_string(&a).unwrap();
        let back: TrainedModel = serde_json::from_str(&json).unwrap();
        assert_eq!(predict(&back, &data, 0.5).unwrap(), predict(&a, &data, 0.5).unwrap(), "{family}");
    }
}

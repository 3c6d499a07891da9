use stroke_core::classifiers::{ModelKind, ModelSpec, TreeConfig};
use stroke_core::experiments::{Experiment, ExperimentConfig, FeatureSet, RunExecutor, Sequential};
use stroke_core::ingest::{encode, fit_encoding};
use stroke_core::synth::synthesize;
use stroke_core::EncodedMatrix;

fn cohort() -> EncodedMatrix {
    let records = synthesize(600, 0.15, 31).unwrap();
    encode(&records, &fit_encoding(&records).unwrap()).unwrap()
}

fn config(feature_set: FeatureSet) -> ExperimentConfig {
    ExperimentConfig {
        feature_set,
        model: ModelSpec::new(ModelKind::DecisionTree(TreeConfig::default()), 0),
        runs: 6,
        ..ExperimentConfig::default()
    }
}

/// Executes jobs back to front, then restores index order.
struct Reversed;

impl RunExecutor for Reversed {
    fn map<T: Send>(&self, n: usize, job: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        let mut out: Vec<(usize, T)> = (0..n).rev().map(|i| (i, job(i))).collect();
        out.sort_by_key(|(i, _)| *i);
        out.into_iter().map(|(_, t)| t).collect()
    }
}

#[test]
fn execution_order_does_not_change_results() {
    let data = cohort();
    let exp = Experiment::new(config(FeatureSet::TopFour), &data).unwrap();
    let a = exp.run_benchmark(&Sequential).unwrap();
    let b = exp.run_benchmark(&Reversed).unwrap();
    assert_eq!(a, b);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn each_run_reproduces_standalone() {
    let data = cohort();
    let exp = Experiment::new(config(FeatureSet::All), &data).unwrap();
    let result = exp.run_benchmark(&Sequential).unwrap();
    for run in &result.runs {
        assert_eq!(&exp.run_single(run.index, run.seed).unwrap(), run);
    }
    let mut seeds: Vec<u64> = result.runs.iter().map(|r| r.seed).collect();
    seeds.dedup();
    assert_eq!(seeds.len(), 6);
}

#[test]
fn train_fold_pca_ignores_test_rows() {
    let data = cohort();
    let exp = Experiment::new(config(FeatureSet::PrincipalComponents { k: 2, train_fold_only: true }), &data).unwrap();
    let prepared = exp.prepare_run(77).unwrap();
    let mut perturbed = data.clone();
    for &id in prepared.test.row_ids() {
        for c in 0..perturbed.n_cols() {
            let v = perturbed.row(id)[c];
            perturbed.set(id, c, v * 3.0 + 50.0);
        }
    }
    let exp2 = Experiment::new(config(FeatureSet::PrincipalComponents { k: 2, train_fold_only: true }), &perturbed).unwrap();
    let again = exp2.prepare_run(77).unwrap();
    assert_eq!(prepared.projection, again.projection);
    assert_eq!(prepared.train, again.train);
    assert_ne!(prepared.test, again.test);
}

#[test]
fn global_pca_sees_every_row() {
    let data = cohort();
    let exp = Experiment::new(config(FeatureSet::PrincipalComponents { k: 2, train_fold_only: false }), &data).unwrap();
    let a = exp.prepare_run(1).unwrap().projection.unwrap();
    let b = exp.prepare_run(2).unwrap().projection.unwrap();
    assert_eq!(a, b);
}

#![allow(dead_code)]

use decole::dataset::{DatasetParts, LabeledDataset};
use decole::learner::{Classifier, Learner};
use decole::Result;
use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use std::sync::Mutex;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Random dataset with `k` groups, Gaussian features, and gold/observed labels.
pub fn random_dataset(
    rng: &mut impl Rng,
    n: usize,
    d: usize,
    k: usize,
    with_gold: bool,
) -> LabeledDataset {
    let features = Array2::from_shape_fn((n, d), |_| rng.gen_range(-3.0..3.0));
    let groups: Vec<usize> = (0..n)
        .map(|i| if i < k { i } else { rng.gen_range(0..k) })
        .collect();
    let gold: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
    let observed: Vec<u8> = gold
        .iter()
        .map(|&g| if rng.gen_bool(0.25) { 1 - g } else { g })
        .collect();
    DatasetParts {
        features,
        groups,
        k: Some(k),
        group_values: None,
        observed,
        gold: with_gold.then_some(gold),
        ids: (0..n).map(|i| format!("id{i}")).collect(),
    }
    .validate()
    .unwrap()
}

/// Learner wrapper that records the first feature of every training row it
/// sees, so tests can check that held-out rows were never fitted on.
pub struct SpyLearner<L> {
    pub inner: L,
    pub seen: Mutex<Vec<Vec<f64>>>,
}

pub struct SpyModel<M> {
    inner: M,
    trained_on: Vec<f64>,
}

impl<L: Learner> Learner for SpyLearner<L> {
    type Model = SpyModel<L::Model>;

    fn fit(&self, features: ArrayView2<'_, f64>, labels: &[u8]) -> Result<Self::Model> {
        let tags: Vec<f64> = features.column(0).to_vec();
        self.seen.lock().unwrap().push(tags.clone());
        Ok(SpyModel {
            inner: self.inner.fit(features, labels)?,
            trained_on: tags,
        })
    }
}

impl<M: Classifier> Classifier for SpyModel<M> {
    fn predict_prob(&self, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        for tag in features.column(0) {
            assert!(
                !self.trained_on.contains(tag),
                "row tagged {tag} predicted by a model trained on it"
            );
        }
        self.inner.predict_prob(features)
    }
}

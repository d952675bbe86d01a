use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Classifier, Learner};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::seed;

/// Out-of-sample probability of class 1 for each instance, and the fold
/// that held the instance out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbEstimates {
    pub p_hat: Vec<f64>,
    pub fold_assignment: Vec<usize>,
    pub folds: usize,
}

/// Assigns each instance to one of `k` folds so that every class is spread
/// as evenly as possible. Class members are shuffled, then dealt round-robin;
/// class 1 starts where class 0 stopped so fold totals also balance.
pub fn stratified_folds<R: Rng>(labels: &[u8], k: usize, rng: &mut R) -> Vec<usize> {
    let mut folds = vec![0; labels.len()];
    let mut offset = 0;
    for class in 0..2u8 {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        for (pos, &i) in members.iter().enumerate() {
            folds[i] = (offset + pos) % k;
        }
        offset = (offset + members.len()) % k;
    }
    folds
}

/// Fits one model per fold on the other folds and predicts the held-out fold.
///
/// Fold assignment is fixed from `seed` before any fitting, so the parallel
/// and sequential paths return identical estimates.
pub fn crossval_prob<L: Learner>(
    learner: &L,
    features: ArrayView2<'_, f64>,
    labels: &[u8],
    k_cv: usize,
    seed: u64,
    execution: Execution,
) -> Result<ProbEstimates> {
    if k_cv < 2 {
        return Err(Error::Config(format!(
            "cross-validation needs at least 2 folds, got {k_cv}"
        )));
    }
    if features.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            field: "labels",
            expected: features.nrows(),
            found: labels.len(),
        });
    }
    for class in 0..2u8 {
        let count = labels.iter().filter(|&&y| y == class).count();
        if count < k_cv {
            return Err(Error::ClassTooSmall {
                class,
                count,
                folds: k_cv,
            });
        }
    }

    let mut rng = seed::stream(seed, "learner/folds");
    let fold_assignment = stratified_folds(labels, k_cv, &mut rng);

    let per_fold = execution.try_map((0..k_cv).collect(), |fold| {
        let (train, test): (Vec<usize>, Vec<usize>) =
            (0..labels.len()).partition(|&i| fold_assignment[i] != fold);
        let train_labels: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
        let model = learner.fit(features.select(Axis(0), &train).view(), &train_labels)?;
        let probs = model.predict_prob(features.select(Axis(0), &test).view())?;
        Ok::<_, Error>((test, probs))
    })?;

    let mut p_hat = vec![f64::NAN; labels.len()];
    for (test, probs) in per_fold {
        for (i, p) in test.into_iter().zip(probs) {
            p_hat[i] = p;
        }
    }
    Ok(ProbEstimates {
        p_hat,
        fold_assignment,
        folds: k_cv,
    })
}

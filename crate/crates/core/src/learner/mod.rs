//! Base classifier contract, the shipped logistic-regression learner, and
//! stratified cross-validated out-of-sample probabilities.

mod crossval;
mod logistic;

pub use crossval::{crossval_prob, stratified_folds, ProbEstimates};
pub use logistic::{
    fit, gradient, objective, predict_prob, LogisticHyperparams, LogisticModel, LogisticRegression,
    Standardizer,
};

use ndarray::ArrayView2;

use crate::error::Result;

/// A fitted binary classifier.
pub trait Classifier {
    /// Probability of class 1 for each row.
    fn predict_prob(&self, features: ArrayView2<'_, f64>) -> Result<Vec<f64>>;
}

/// Something that fits a [`Classifier`] from features and 0/1 labels.
///
/// Implementations must be pure: the same inputs give the same model.
pub trait Learner: Sync {
    type Model: Classifier + Send;

    fn fit(&self, features: ArrayView2<'_, f64>, labels: &[u8]) -> Result<Self::Model>;
}

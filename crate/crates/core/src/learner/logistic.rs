use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{Classifier, Learner};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticHyperparams {
    pub l2_lambda: f64,
    pub max_iterations: usize,
    /// Stop once the gradient's infinity norm falls to this value.
    pub tolerance: f64,
}

impl Default for LogisticHyperparams {
    fn default() -> Self {
        LogisticHyperparams {
            l2_lambda: 1e-4,
            max_iterations: 10_000,
            tolerance: 1e-6,
        }
    }
}

impl LogisticHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return Err(Error::Config(format!(
                "l2_lambda must be >= 0, got {}",
                self.l2_lambda
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::Config(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Per-column affine map to zero mean and unit variance, estimated on training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub scale: Array1<f64>,
}

impl Standardizer {
    pub fn fit(features: ArrayView2<'_, f64>) -> Standardizer {
        let d = features.ncols();
        let mut mean = Array1::zeros(d);
        let mut scale = Array1::ones(d);
        for (j, column) in features.axis_iter(Axis(1)).enumerate() {
            let first = column.first().copied().unwrap_or(0.0);
            if column.iter().all(|&v| v == first) {
                // Constant column: center exactly so it contributes zeros.
                mean[j] = first;
                continue;
            }
            let m = column.mean().unwrap_or(0.0);
            let var = column.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / column.len() as f64;
            mean[j] = m;
            if var.sqrt() > 1e-12 * m.abs().max(1.0) {
                scale[j] = var.sqrt();
            }
        }
        Standardizer { mean, scale }
    }

    pub fn transform(&self, features: ArrayView2<'_, f64>) -> Array2<f64> {
        (&features - &self.mean) / &self.scale
    }
}

/// Fitted model. Weights act on standardized features.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    pub weights: Array1<f64>,
    pub intercept: f64,
    pub standardizer: Standardizer,
    pub hyperparams: LogisticHyperparams,
    pub iterations: usize,
    pub converged: bool,
}

impl LogisticModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean negative log-likelihood plus `lambda / 2 * |w|^2` (intercept not penalized).
pub fn objective(
    design: ArrayView2<'_, f64>,
    labels: &[u8],
    weights: ArrayView1<'_, f64>,
    intercept: f64,
    lambda: f64,
) -> f64 {
    let logits = design.dot(&weights);
    let nll: f64 = logits
        .iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let z = z + intercept;
            softplus(z) - y as f64 * z
        })
        .sum();
    nll / labels.len() as f64 + 0.5 * lambda * weights.dot(&weights)
}

/// Gradient of [`objective`] with respect to `(weights, intercept)`.
pub fn gradient(
    design: ArrayView2<'_, f64>,
    labels: &[u8],
    weights: ArrayView1<'_, f64>,
    intercept: f64,
    lambda: f64,
) -> (Array1<f64>, f64) {
    let n = labels.len() as f64;
    let residual: Array1<f64> = design
        .dot(&weights)
        .iter()
        .zip(labels)
        .map(|(&z, &y)| sigmoid(z + intercept) - y as f64)
        .collect();
    let grad_w = design.t().dot(&residual) / n + &(lambda * &weights);
    (grad_w, residual.sum() / n)
}

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

/// Full-batch gradient descent with backtracking line search.
pub fn fit(
    features: ArrayView2<'_, f64>,
    labels: &[u8],
    hyperparams: &LogisticHyperparams,
) -> Result<LogisticModel> {
    hyperparams.validate()?;
    if features.nrows() != labels.len() {
        return Err(Error::LengthMismatch {
            field: "labels",
            expected: features.nrows(),
            found: labels.len(),
        });
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        return Err(Error::SingleClass(0));
    }
    if positives == labels.len() {
        return Err(Error::SingleClass(1));
    }
    if let Some((row, column)) = features
        .indexed_iter()
        .find_map(|((i, j), v)| (!v.is_finite()).then_some((i, j)))
    {
        return Err(Error::NonFiniteFeature { row, column });
    }

    let standardizer = Standardizer::fit(features);
    let design = standardizer.transform(features);
    let lambda = hyperparams.l2_lambda;

    let mut weights = Array1::<f64>::zeros(features.ncols());
    let mut intercept = 0.0;
    let mut loss = objective(design.view(), labels, weights.view(), intercept, lambda);
    let mut step = 1.0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < hyperparams.max_iterations {
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: iterations,
            });
        }
        let (grad_w, grad_b) = gradient(design.view(), labels, weights.view(), intercept, lambda);
        let inf_norm = grad_w.iter().fold(grad_b.abs(), |m, g| m.max(g.abs()));
        if inf_norm <= hyperparams.tolerance {
            converged = true;
            break;
        }
        let sq_norm = grad_w.dot(&grad_w) + grad_b * grad_b;

        let mut accepted = None;
        while step >= MIN_STEP {
            let trial_w = &weights - &(step * &grad_w);
            let trial_b = intercept - step * grad_b;
            let trial_loss = objective(design.view(), labels, trial_w.view(), trial_b, lambda);
            if trial_loss.is_finite() && trial_loss <= loss - ARMIJO * step * sq_norm {
                accepted = Some((trial_w, trial_b, trial_loss));
                break;
            }
            step *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((w, b, l)) => {
                weights = w;
                intercept = b;
                loss = l;
                step *= 2.0;
            }
            // No descent possible at machine precision.
            None => break,
        }
    }

    Ok(LogisticModel {
        weights,
        intercept,
        standardizer,
        hyperparams: *hyperparams,
        iterations,
        converged,
    })
}

/// Smallest gap kept between a probability and 0 or 1.
const PROB_MARGIN: f64 = 1e-15;

pub fn predict_prob(model: &LogisticModel, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if features.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: features.ncols(),
        });
    }
    let design = model.standardizer.transform(features);
    Ok(design
        .dot(&model.weights)
        .iter()
        .map(|&z| sigmoid(z + model.intercept).clamp(PROB_MARGIN, 1.0 - PROB_MARGIN))
        .collect())
}

impl Classifier for LogisticModel {
    fn predict_prob(&self, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        predict_prob(self, features)
    }
}

/// The shipped base learner.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LogisticRegression(pub LogisticHyperparams);

impl Learner for LogisticRegression {
    type Model = LogisticModel;

    fn fit(&self, features: ArrayView2<'_, f64>, labels: &[u8]) -> Result<LogisticModel> {
        fit(features, labels, &self.0)
    }
}

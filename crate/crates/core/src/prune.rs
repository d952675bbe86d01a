//! Pruning engines: decoupled confident learning (one model and one pair of
//! thresholds per group), coupled confident learning (one model and one pair
//! of thresholds overall), and uniform random pruning.
//!
//! Within a scope, `lb` is the mean out-of-sample probability over observed
//! positives and `ub` the mean over observed negatives. An observed positive
//! is pruned when its probability is below `ub`; an observed negative when
//! it is above `lb`. Comparisons are strict.

use std::fmt;

use ndarray::{concatenate, Array2, Axis};
use rand::seq::index;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::learner::{
    crossval_prob, Learner, LogisticHyperparams, LogisticRegression, ProbEstimates,
};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Decole,
    Cl,
    Random,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Decole, Method::Cl, Method::Random];

    pub fn name(self) -> &'static str {
        match self {
            Method::Decole => "decole",
            Method::Cl => "cl",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown method `{s}` (expected decole, cl, or random)"
                ))
            })
    }
}

/// Where a set of thresholds applies. Serialized as `"global"` or `"g<index>"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    Global,
    Group(usize),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Global => f.write_str("global"),
            Scope::Group(g) => write!(f, "g{g}"),
        }
    }
}

impl std::str::FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Scope> {
        if s == "global" {
            return Ok(Scope::Global);
        }
        s.strip_prefix('g')
            .and_then(|g| g.parse().ok())
            .map(Scope::Group)
            .ok_or_else(|| Error::Config(format!("invalid scope `{s}`")))
    }
}

impl Serialize for Scope {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Scope, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub scope: Scope,
    /// Mean probability over observed positives.
    pub lb: f64,
    /// Mean probability over observed negatives.
    pub ub: f64,
}

impl Thresholds {
    /// `lb > ub`: the classifier ranks observed positives above observed negatives on average.
    pub fn is_informative(&self) -> bool {
        self.lb > self.ub
    }
}

pub fn compute_thresholds(p_hat: &[f64], observed: &[u8], scope: Scope) -> Result<Thresholds> {
    let mean_over = |class: u8| {
        let (sum, count) = p_hat
            .iter()
            .zip(observed)
            .filter(|(_, &y)| y == class)
            .fold((0.0, 0usize), |(s, c), (&p, _)| (s + p, c + 1));
        (count > 0).then(|| sum / count as f64)
    };
    Ok(Thresholds {
        scope,
        lb: mean_over(1).ok_or(Error::EmptyScope("positive"))?,
        ub: mean_over(0).ok_or(Error::EmptyScope("negative"))?,
    })
}

/// Indices flagged by the strict pruning rule, ascending.
pub fn apply_pruning_rule(p_hat: &[f64], observed: &[u8], thresholds: &Thresholds) -> Vec<usize> {
    p_hat
        .iter()
        .zip(observed)
        .enumerate()
        .filter(|(_, (&p, &y))| (y == 1 && p < thresholds.ub) || (y == 0 && p > thresholds.lb))
        .map(|(i, _)| i)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    /// No observed positives or no observed negatives; scope left unpruned.
    DegenerateScope,
    /// Too few instances of a class for stratified cross-validation; scope left unpruned.
    TooFewForFolds,
    /// `lb <= ub`; pruning still applied.
    UninformativeThresholds,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneWarning {
    pub scope: Scope,
    pub kind: WarningKind,
    pub detail: String,
}

/// Probabilities computed for one scope; `rows` maps positions in
/// `estimates` back to dataset rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ScopeEstimates {
    pub scope: Scope,
    pub rows: Vec<usize>,
    pub estimates: ProbEstimates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneResult {
    pub method: Method,
    pub seed: u64,
    /// Pruned ids, in dataset order.
    pub pruned: Vec<String>,
    pub thresholds: Vec<Thresholds>,
    pub warnings: Vec<PruneWarning>,
    #[serde(skip)]
    pub pruned_rows: Vec<usize>,
    #[serde(skip)]
    pub estimates: Vec<ScopeEstimates>,
}

impl PruneResult {
    pub fn len(&self) -> usize {
        self.pruned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pruned.is_empty()
    }

    /// Per-row pruned flags for a dataset with `n` rows.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for &i in &self.pruned_rows {
            mask[i] = true;
        }
        mask
    }
}

/// Learner settings shared by the two confident-learning engines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    pub l2_lambda: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub k_cv: usize,
    /// Feed group indicators to the classifier. `None` uses the method
    /// default: off for decoupled models, on for the coupled model.
    pub group_feature: Option<bool>,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for PruneConfig {
    fn default() -> Self {
        let hp = LogisticHyperparams::default();
        PruneConfig {
            l2_lambda: hp.l2_lambda,
            max_iterations: hp.max_iterations,
            tolerance: hp.tolerance,
            k_cv: 5,
            group_feature: None,
            execution: Execution::default(),
        }
    }
}

impl PruneConfig {
    pub fn hyperparams(&self) -> LogisticHyperparams {
        LogisticHyperparams {
            l2_lambda: self.l2_lambda,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
        }
    }
}

/// Feature matrix for `rows`, with drop-first one-hot group columns when requested.
fn design_matrix(dataset: &LabeledDataset, rows: &[usize], group_feature: bool) -> Array2<f64> {
    let base = dataset.features().select(Axis(0), rows);
    if !group_feature || dataset.k() < 2 {
        return base;
    }
    let indicators = Array2::from_shape_fn((rows.len(), dataset.k() - 1), |(i, j)| {
        if dataset.groups()[rows[i]] == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    concatenate![Axis(1), base, indicators]
}

struct ScopeOutcome {
    thresholds: Option<Thresholds>,
    pruned_rows: Vec<usize>,
    warnings: Vec<PruneWarning>,
    estimates: Option<ScopeEstimates>,
}

impl ScopeOutcome {
    fn skipped(scope: Scope, kind: WarningKind, detail: String) -> ScopeOutcome {
        tracing::warn!(%scope, ?kind, "{detail}");
        ScopeOutcome {
            thresholds: None,
            pruned_rows: Vec::new(),
            warnings: vec![PruneWarning {
                scope,
                kind,
                detail,
            }],
            estimates: None,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn prune_scope<L: Learner>(
    dataset: &LabeledDataset,
    rows: Vec<usize>,
    scope: Scope,
    learner: &L,
    k_cv: usize,
    group_feature: bool,
    seed: u64,
    execution: Execution,
) -> Result<ScopeOutcome> {
    let labels: Vec<u8> = rows.iter().map(|&i| dataset.observed()[i]).collect();
    for class in 0..2u8 {
        let count = labels.iter().filter(|&&y| y == class).count();
        if count == 0 {
            return Ok(ScopeOutcome::skipped(
                scope,
                WarningKind::DegenerateScope,
                format!(
                    "no observed class-{class} instances among {} rows; not pruned",
                    rows.len()
                ),
            ));
        }
        if count < k_cv {
            return Ok(ScopeOutcome::skipped(
                scope,
                WarningKind::TooFewForFolds,
                format!("class {class} has {count} instances, fewer than {k_cv} folds; not pruned"),
            ));
        }
    }

    let design = design_matrix(dataset, &rows, group_feature);
    let estimates = crossval_prob(learner, design.view(), &labels, k_cv, seed, execution)?;
    let thresholds = compute_thresholds(&estimates.p_hat, &labels, scope)?;
    let mut warnings = Vec::new();
    if !thresholds.is_informative() {
        warnings.push(PruneWarning {
            scope,
            kind: WarningKind::UninformativeThresholds,
            detail: format!(
                "lb = {} does not exceed ub = {}",
                thresholds.lb, thresholds.ub
            ),
        });
    }
    let pruned_rows = apply_pruning_rule(&estimates.p_hat, &labels, &thresholds)
        .into_iter()
        .map(|local| rows[local])
        .collect();
    Ok(ScopeOutcome {
        thresholds: Some(thresholds),
        pruned_rows,
        warnings,
        estimates: Some(ScopeEstimates {
            scope,
            rows,
            estimates,
        }),
    })
}

fn assemble(
    dataset: &LabeledDataset,
    method: Method,
    seed: u64,
    outcomes: Vec<ScopeOutcome>,
) -> PruneResult {
    let mut result = PruneResult {
        method,
        seed,
        pruned: Vec::new(),
        thresholds: Vec::new(),
        warnings: Vec::new(),
        pruned_rows: Vec::new(),
        estimates: Vec::new(),
    };
    for outcome in outcomes {
        result.thresholds.extend(outcome.thresholds);
        result.pruned_rows.extend(outcome.pruned_rows);
        result.warnings.extend(outcome.warnings);
        result.estimates.extend(outcome.estimates);
    }
    result.pruned_rows.sort_unstable();
    result.pruned = result
        .pruned_rows
        .iter()
        .map(|&i| dataset.ids()[i].clone())
        .collect();
    result
}

/// Decoupled confident learning with any base learner.
///
/// Each group is cross-validated, thresholded, and pruned on its own rows
/// only. Every group uses the same `seed`, so a group's outcome depends only
/// on its own rows.
pub fn decole_prune_with<L: Learner>(
    dataset: &LabeledDataset,
    learner: &L,
    k_cv: usize,
    group_feature: bool,
    seed: u64,
    execution: Execution,
) -> Result<PruneResult> {
    let groups: Vec<usize> = (0..dataset.k()).collect();
    let outcomes = execution.try_map(groups, |g| {
        let rows = dataset.rows_of_group(g);
        prune_scope(
            dataset,
            rows,
            Scope::Group(g),
            learner,
            k_cv,
            group_feature,
            seed,
            execution,
        )
    })?;
    Ok(assemble(dataset, Method::Decole, seed, outcomes))
}

/// Coupled confident learning with any base learner: one model over all rows.
pub fn cl_prune_with<L: Learner>(
    dataset: &LabeledDataset,
    learner: &L,
    k_cv: usize,
    group_feature: bool,
    seed: u64,
    execution: Execution,
) -> Result<PruneResult> {
    let rows: Vec<usize> = (0..dataset.n()).collect();
    let outcome = prune_scope(
        dataset,
        rows,
        Scope::Global,
        learner,
        k_cv,
        group_feature,
        seed,
        execution,
    )?;
    Ok(assemble(dataset, Method::Cl, seed, vec![outcome]))
}

pub fn decole_prune(
    dataset: &LabeledDataset,
    config: &PruneConfig,
    seed: u64,
) -> Result<PruneResult> {
    config.hyperparams().validate()?;
    decole_prune_with(
        dataset,
        &LogisticRegression(config.hyperparams()),
        config.k_cv,
        config.group_feature.unwrap_or(false),
        seed,
        config.execution,
    )
}

pub fn cl_prune(dataset: &LabeledDataset, config: &PruneConfig, seed: u64) -> Result<PruneResult> {
    config.hyperparams().validate()?;
    cl_prune_with(
        dataset,
        &LogisticRegression(config.hyperparams()),
        config.k_cv,
        config.group_feature.unwrap_or(true),
        seed,
        config.execution,
    )
}

/// Prunes `count` rows chosen uniformly without replacement.
pub fn random_prune(dataset: &LabeledDataset, count: usize, seed: u64) -> Result<PruneResult> {
    if count > dataset.n() {
        return Err(Error::Config(format!(
            "cannot randomly prune {count} of {} instances",
            dataset.n()
        )));
    }
    let mut rng = seed::stream(seed, "prune/random");
    let rows = index::sample(&mut rng, dataset.n(), count).into_vec();
    let outcome = ScopeOutcome {
        thresholds: None,
        pruned_rows: rows,
        warnings: Vec::new(),
        estimates: None,
    };
    Ok(assemble(dataset, Method::Random, seed, vec![outcome]))
}

/// The dataset without the pruned ids, order preserved.
pub fn retain(dataset: &LabeledDataset, result: &PruneResult) -> Result<LabeledDataset> {
    let index = dataset.id_index()?;
    let mut drop = vec![false; dataset.n()];
    for id in &result.pruned {
        let row = index
            .get(id.as_str())
            .ok_or_else(|| Error::UnknownId(id.clone()))?;
        drop[*row] = true;
    }
    let keep: Vec<usize> = (0..dataset.n()).filter(|&i| !drop[i]).collect();
    Ok(dataset.select(&keep))
}

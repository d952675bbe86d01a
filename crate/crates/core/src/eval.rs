//! Pruning quality (recall/precision against the gold error mask), label
//! quality (FPR/FNR of observed labels against gold), and multi-run
//! aggregation with Student-t confidence half-widths.
//!
//! Ratios with a zero denominator are `None`, never 0 or 1.
//!
//! Scope keys: `overall`, `g<k>`, and, for pruning quality, `g<k>/false_negative`
//! and `g<k>/false_positive`. The false-negative scope of a group is its
//! observed negatives (the only rows that can carry a false negative); the
//! false-positive scope is its observed positives.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::dataset::{ErrorMask, ErrorType, LabeledDataset};
use crate::error::{Error, Result};
use crate::prune::PruneResult;

/// Metric values keyed by `"<metric>/<scope>"`.
pub type MetricBundle = BTreeMap<String, Option<f64>>;

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn group_key(g: usize) -> String {
    format!("g{g}")
}

fn type_key(g: usize, ty: ErrorType) -> String {
    let suffix = match ty {
        ErrorType::FalseNegative => "false_negative",
        ErrorType::FalsePositive => "false_positive",
        ErrorType::Clean => "none",
    };
    format!("g{g}/{suffix}")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneTally {
    /// Pruned and erroneous.
    pub hits: usize,
    pub pruned: usize,
    pub errors: usize,
}

impl PruneTally {
    pub fn recall(&self) -> Option<f64> {
        ratio(self.hits, self.errors)
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.hits, self.pruned)
    }

    fn add(&mut self, pruned: bool, error: bool) {
        self.pruned += pruned as usize;
        self.errors += error as usize;
        self.hits += (pruned && error) as usize;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopedPruneQuality {
    #[serde(flatten)]
    pub tally: PruneTally,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PruneQuality {
    pub scopes: BTreeMap<String, ScopedPruneQuality>,
}

impl PruneQuality {
    pub fn tally(&self, scope: &str) -> Option<PruneTally> {
        self.scopes.get(scope).map(|s| s.tally)
    }

    pub fn recall(&self, scope: &str) -> Option<f64> {
        self.scopes.get(scope).and_then(|s| s.recall)
    }

    pub fn precision(&self, scope: &str) -> Option<f64> {
        self.scopes.get(scope).and_then(|s| s.precision)
    }

    pub fn metrics(&self) -> MetricBundle {
        let mut out = MetricBundle::new();
        for (scope, q) in &self.scopes {
            out.insert(format!("recall/{scope}"), q.recall);
            out.insert(format!("precision/{scope}"), q.precision);
        }
        out
    }
}

/// Pruning quality from per-row flags.
pub fn prune_quality_from_flags(
    pruned: &[bool],
    mask: &ErrorMask,
    observed: &[u8],
    groups: &[usize],
    k: usize,
) -> PruneQuality {
    let mut tallies: BTreeMap<String, PruneTally> = BTreeMap::new();
    tallies.insert("overall".into(), PruneTally::default());
    for g in 0..k {
        for key in [
            group_key(g),
            type_key(g, ErrorType::FalseNegative),
            type_key(g, ErrorType::FalsePositive),
        ] {
            tallies.insert(key, PruneTally::default());
        }
    }
    for i in 0..pruned.len() {
        let (p, e, g) = (pruned[i], mask.is_error[i], groups[i]);
        tallies.get_mut("overall").unwrap().add(p, e);
        tallies.get_mut(&group_key(g)).unwrap().add(p, e);
        let (scope_type, typed_error) = if observed[i] == 0 {
            (
                ErrorType::FalseNegative,
                mask.error_type[i] == ErrorType::FalseNegative,
            )
        } else {
            (
                ErrorType::FalsePositive,
                mask.error_type[i] == ErrorType::FalsePositive,
            )
        };
        tallies
            .get_mut(&type_key(g, scope_type))
            .unwrap()
            .add(p, typed_error);
    }
    PruneQuality {
        scopes: tallies
            .into_iter()
            .map(|(scope, tally)| {
                let q = ScopedPruneQuality {
                    tally,
                    recall: tally.recall(),
                    precision: tally.precision(),
                };
                (scope, q)
            })
            .collect(),
    }
}

/// Pruning quality of `result` against the pre-pruning `dataset` (gold required).
pub fn prune_quality(result: &PruneResult, dataset: &LabeledDataset) -> Result<PruneQuality> {
    let mask = dataset.error_mask()?;
    let index = dataset.id_index()?;
    let mut flags = vec![false; dataset.n()];
    for id in &result.pruned {
        let row = index
            .get(id.as_str())
            .ok_or_else(|| Error::UnknownId(id.clone()))?;
        flags[*row] = true;
    }
    Ok(prune_quality_from_flags(
        &flags,
        &mask,
        dataset.observed(),
        dataset.groups(),
        dataset.k(),
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelTally {
    /// Observed 1, gold 0.
    pub false_positives: usize,
    /// Gold 0.
    pub negatives: usize,
    /// Observed 0, gold 1.
    pub false_negatives: usize,
    /// Gold 1.
    pub positives: usize,
}

impl LabelTally {
    pub fn fpr(&self) -> Option<f64> {
        ratio(self.false_positives, self.negatives)
    }

    pub fn fnr(&self) -> Option<f64> {
        ratio(self.false_negatives, self.positives)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopedLabelQuality {
    #[serde(flatten)]
    pub tally: LabelTally,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LabelQuality {
    pub scopes: BTreeMap<String, ScopedLabelQuality>,
}

impl LabelQuality {
    pub fn tally(&self, scope: &str) -> Option<LabelTally> {
        self.scopes.get(scope).map(|s| s.tally)
    }

    pub fn fpr(&self, scope: &str) -> Option<f64> {
        self.scopes.get(scope).and_then(|s| s.fpr)
    }

    pub fn fnr(&self, scope: &str) -> Option<f64> {
        self.scopes.get(scope).and_then(|s| s.fnr)
    }

    pub fn metrics(&self) -> MetricBundle {
        let mut out = MetricBundle::new();
        for (scope, q) in &self.scopes {
            out.insert(format!("fpr/{scope}"), q.fpr);
            out.insert(format!("fnr/{scope}"), q.fnr);
        }
        out
    }
}

/// FPR/FNR of the observed labels against gold, overall and per group.
pub fn label_quality(dataset: &LabeledDataset) -> Result<LabelQuality> {
    let gold = dataset.require_gold()?;
    let mut overall = LabelTally::default();
    let mut per_group = vec![LabelTally::default(); dataset.k()];
    for ((&o, &y), &g) in dataset.observed().iter().zip(gold).zip(dataset.groups()) {
        for t in [&mut overall, &mut per_group[g]] {
            if y == 0 {
                t.negatives += 1;
                t.false_positives += (o == 1) as usize;
            } else {
                t.positives += 1;
                t.false_negatives += (o == 0) as usize;
            }
        }
    }
    let scoped = |tally: LabelTally| ScopedLabelQuality {
        tally,
        fpr: tally.fpr(),
        fnr: tally.fnr(),
    };
    let mut scopes = BTreeMap::new();
    scopes.insert("overall".to_string(), scoped(overall));
    for (g, t) in per_group.into_iter().enumerate() {
        scopes.insert(group_key(g), scoped(t));
    }
    Ok(LabelQuality { scopes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    /// Runs in which the metric was defined.
    pub present: usize,
    pub mean: Option<f64>,
    /// Sample standard deviation (n - 1 denominator).
    pub sd: Option<f64>,
    /// Half-width of the two-sided 95% Student-t interval.
    pub half_width: Option<f64>,
    /// Per-run values, in run order.
    pub values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub metrics: BTreeMap<String, MetricSummary>,
}

impl AggregateReport {
    pub fn mean(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(|m| m.mean)
    }

    pub fn half_width(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).and_then(|m| m.half_width)
    }
}

/// 0.975 quantile of Student's t with `df` degrees of freedom.
pub fn t_quantile_975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df >= 1")
        .inverse_cdf(0.975)
}

pub fn summarize(values: Vec<Option<f64>>) -> MetricSummary {
    // Sorted so the summary does not depend on run order.
    let mut present: Vec<f64> = values.iter().flatten().copied().collect();
    present.sort_by(f64::total_cmp);
    let r = present.len();
    let mean = (r > 0).then(|| present.iter().sum::<f64>() / r as f64);
    let sd = mean.filter(|_| r >= 2).map(|m| {
        let ss: f64 = present.iter().map(|v| (v - m) * (v - m)).sum();
        (ss / (r - 1) as f64).sqrt()
    });
    let half_width = sd.map(|s| t_quantile_975(r - 1) * s / (r as f64).sqrt());
    MetricSummary {
        present: r,
        mean,
        sd,
        half_width,
        values,
    }
}

/// Mean, sample standard deviation, and 95% t half-width per metric across runs.
pub fn aggregate(runs: &[MetricBundle]) -> Result<AggregateReport> {
    if runs.len() < 2 {
        return Err(Error::TooFewRuns(runs.len()));
    }
    for (run, bundle) in runs.iter().enumerate().skip(1) {
        if !bundle.keys().eq(runs[0].keys()) {
            return Err(Error::HeterogeneousKeys { run });
        }
    }
    let metrics = runs[0]
        .keys()
        .map(|key| {
            let values = runs.iter().map(|b| b[key]).collect();
            (key.clone(), summarize(values))
        })
        .collect();
    Ok(AggregateReport {
        runs: runs.len(),
        metrics,
    })
}

/// Metrics for one pruned dataset, as emitted by the `eval` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Option<crate::prune::Method>,
    pub seed: Option<u64>,
    /// Present when the pre-pruning dataset and the prune report are supplied.
    pub pruning: Option<PruneQuality>,
    pub retained: LabelQuality,
    pub pre_pruning: Option<LabelQuality>,
    pub metrics: MetricBundle,
}

/// Scores a retained dataset, and the pruning that produced it when the
/// original dataset and prune result are given.
pub fn evaluate(
    retained: &LabeledDataset,
    original: Option<&LabeledDataset>,
    result: Option<&PruneResult>,
) -> Result<EvalReport> {
    let retained_quality = label_quality(retained)?;
    let pre_pruning = original.map(label_quality).transpose()?;
    let pruning = match (original, result) {
        (Some(original), Some(result)) => Some(prune_quality(result, original)?),
        _ => None,
    };
    let mut metrics = retained_quality.metrics();
    if let Some(p) = &pruning {
        metrics.extend(p.metrics());
    }
    if let Some(pre) = &pre_pruning {
        metrics.extend(
            pre.metrics()
                .into_iter()
                .map(|(k, v)| (format!("pre_{k}"), v)),
        );
    }
    Ok(EvalReport {
        method: result.map(|r| r.method),
        seed: result.map(|r| r.seed),
        pruning,
        retained: retained_quality,
        pre_pruning,
        metrics,
    })
}

/// Flat `metric,scope,value` table; absent values are empty cells.
pub fn metrics_csv(metrics: &MetricBundle) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["metric", "scope", "value"])?;
    for (key, value) in metrics {
        let (metric, scope) = key.split_once('/').unwrap_or((key.as_str(), ""));
        wtr.write_record([
            metric,
            scope,
            &value.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.into_inner()
        .map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

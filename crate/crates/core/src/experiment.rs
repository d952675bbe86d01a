//! End-to-end benchmark runs: for each seed, draw the population, inject
//! noise, run each pruning method, and score it; then aggregate over seeds.
//!
//! A run is a pure function of [`ExperimentConfig`]. The run seed keys the
//! population (`synth/population` stream), the noise (`synth/noise`), the
//! cross-validation folds of both confident-learning engines
//! (`learner/folds`), and random pruning (`prune/random`).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{self, AggregateReport, LabelQuality, MetricBundle, PruneQuality};
use crate::exec::Execution;
use crate::io::write_atomic;
use crate::prune::{self, Method, PruneConfig, PruneResult, PruneWarning, Thresholds};
use crate::seed;
use crate::synth::{generate_population, inject_noise, NoiseSpec, SynthConfig};

/// How many rows random pruning removes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomBudget {
    /// As many as the decoupled engine pruned on the same seed.
    #[default]
    MatchDecole,
    Count(usize),
    Fraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Population settings. `seed` is replaced by each run seed.
    pub synth: SynthConfig,
    pub noise: NoiseSpec,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub learner: PruneConfig,
    pub random_budget: RandomBudget,
    pub execution: Execution,
    /// Not part of the report payload.
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            synth: SynthConfig::default(),
            noise: NoiseSpec::default(),
            methods: Method::ALL.to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            learner: PruneConfig::default(),
            random_budget: RandomBudget::default(),
            execution: Execution::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.methods.iter().collect::<BTreeSet<_>>().len() != self.methods.len() {
            return Err(Error::Config("methods must be distinct".into()));
        }
        if self.methods.contains(&Method::Random) {
            match self.random_budget {
                RandomBudget::MatchDecole if !self.methods.contains(&Method::Decole) => {
                    return Err(Error::Config(
                        "random_budget `match_decole` needs the decole method; set a count or fraction".into(),
                    ))
                }
                RandomBudget::Fraction(f) if !(0.0..=1.0).contains(&f) => {
                    return Err(Error::Config(format!("random fraction must lie in [0, 1], got {f}")))
                }
                _ => {}
            }
        }
        self.synth.validate()?;
        self.noise.validate()?;
        self.learner.hyperparams().validate()?;
        if self.learner.k_cv < 2 {
            return Err(Error::Config(format!(
                "k_cv must be at least 2, got {}",
                self.learner.k_cv
            )));
        }
        Ok(())
    }

    /// Hash of the settings that determine the payload.
    pub fn fingerprint(&self) -> String {
        let payload = ExperimentConfig {
            output_dir: None,
            execution: Execution::default(),
            ..self.clone()
        };
        let json = serde_json::to_string(&payload).expect("config serializes");
        format!("{:016x}", seed::label_hash(&json))
    }

    /// Methods in execution order: decole first so random can match its budget.
    fn ordered_methods(&self) -> Vec<Method> {
        Method::ALL
            .into_iter()
            .filter(|m| self.methods.contains(m))
            .collect()
    }
}

/// Outcome of one method on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    pub seed: u64,
    pub method: Method,
    pub pruned_count: usize,
    pub thresholds: Vec<Thresholds>,
    pub warnings: Vec<PruneWarning>,
    pub pruning: PruneQuality,
    /// Label quality of the retained rows.
    pub retained: LabelQuality,
    /// Label quality before pruning.
    pub pre_pruning: LabelQuality,
    pub metrics: MetricBundle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub fingerprint: String,
    pub seeds: Vec<u64>,
    pub methods: BTreeMap<Method, AggregateReport>,
    pub pre_pruning: AggregateReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub runs: Vec<MethodRun>,
    pub aggregate: AggregateSummary,
}

impl ExperimentReport {
    pub fn run(&self, seed: u64, method: Method) -> Option<&MethodRun> {
        self.runs
            .iter()
            .find(|r| r.seed == seed && r.method == method)
    }
}

fn stage<T>(seed: u64, method: &str, stage: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|source| Error::Stage {
        seed,
        method: method.to_string(),
        stage,
        source: Box::new(source),
    })
}

fn run_seed(config: &ExperimentConfig, seed: u64) -> Result<Vec<MethodRun>> {
    let synth = SynthConfig {
        seed,
        ..config.synth.clone()
    };
    let population = stage(seed, "-", "synth", generate_population(&synth))?;
    let noisy = stage(
        seed,
        "-",
        "noise",
        inject_noise(&population, &config.noise, seed),
    )?;
    let pre = stage(seed, "-", "eval", eval::label_quality(&noisy))?;
    let learner = PruneConfig {
        execution: config.execution,
        ..config.learner
    };

    let mut runs = Vec::new();
    let mut decole_count = None;
    for method in config.ordered_methods() {
        let name = method.name();
        let result: PruneResult = stage(
            seed,
            name,
            "prune",
            match method {
                Method::Decole => prune::decole_prune(&noisy, &learner, seed),
                Method::Cl => prune::cl_prune(&noisy, &learner, seed),
                Method::Random => {
                    let count = match config.random_budget {
                        RandomBudget::MatchDecole => {
                            decole_count.expect("decole runs before random")
                        }
                        RandomBudget::Count(c) => c,
                        RandomBudget::Fraction(f) => (f * noisy.n() as f64).round() as usize,
                    };
                    prune::random_prune(&noisy, count, seed)
                }
            },
        )?;
        if method == Method::Decole {
            decole_count = Some(result.len());
        }
        let pruning = stage(seed, name, "eval", eval::prune_quality(&result, &noisy))?;
        let kept = stage(seed, name, "retain", prune::retain(&noisy, &result))?;
        let retained = stage(seed, name, "eval", eval::label_quality(&kept))?;

        let mut metrics = pruning.metrics();
        metrics.extend(retained.metrics());
        metrics.insert(
            "pruned_fraction/overall".into(),
            Some(result.len() as f64 / noisy.n() as f64),
        );
        runs.push(MethodRun {
            seed,
            method,
            pruned_count: result.len(),
            thresholds: result.thresholds,
            warnings: result.warnings,
            pruning,
            retained,
            pre_pruning: pre.clone(),
            metrics,
        });
    }
    Ok(runs)
}

/// Aggregates per-seed runs. Depends only on `runs` (and the config identity).
pub fn aggregate_runs(config: &ExperimentConfig, runs: &[MethodRun]) -> Result<AggregateSummary> {
    let summarize = |bundles: Vec<MetricBundle>| -> Result<AggregateReport> {
        if bundles.len() >= 2 {
            eval::aggregate(&bundles)
        } else {
            let metrics = bundles
                .first()
                .map(|b| {
                    b.iter()
                        .map(|(k, v)| (k.clone(), eval::summarize(vec![*v])))
                        .collect()
                })
                .unwrap_or_default();
            Ok(AggregateReport {
                runs: bundles.len(),
                metrics,
            })
        }
    };
    let mut methods = BTreeMap::new();
    for method in config.ordered_methods() {
        let bundles = config
            .seeds
            .iter()
            .filter_map(|&s| runs.iter().find(|r| r.seed == s && r.method == method))
            .map(|r| r.metrics.clone())
            .collect();
        methods.insert(method, summarize(bundles)?);
    }
    let pre = config
        .seeds
        .iter()
        .filter_map(|&s| runs.iter().find(|r| r.seed == s))
        .map(|r| r.pre_pruning.metrics())
        .collect();
    Ok(AggregateSummary {
        fingerprint: config.fingerprint(),
        seeds: config.seeds.clone(),
        methods,
        pre_pruning: summarize(pre)?,
    })
}

/// Runs every seed (concurrently under parallel execution) and aggregates.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let per_seed = config
        .execution
        .try_map(config.seeds.clone(), |seed| run_seed(config, seed))?;
    let runs: Vec<MethodRun> = per_seed.into_iter().flatten().collect();
    let aggregate = aggregate_runs(config, &runs)?;
    Ok(ExperimentReport { runs, aggregate })
}

fn split_key(key: &str) -> (&str, &str) {
    key.split_once('/').unwrap_or((key, ""))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per (seed, method, metric, scope).
pub fn runs_csv(runs: &[MethodRun]) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(["seed", "method", "metric", "scope", "value"])?;
    for run in runs {
        for (key, value) in &run.metrics {
            let (metric, scope) = split_key(key);
            wtr.write_record([
                &run.seed.to_string(),
                run.method.name(),
                metric,
                scope,
                &fmt_opt(*value),
            ])?;
        }
    }
    wtr.into_inner()
        .map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

/// One row per (method, metric, scope). Pre-pruning rates use method `pre_pruning`.
pub fn aggregate_csv(summary: &AggregateSummary) -> Result<Vec<u8>> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record([
        "method",
        "metric",
        "scope",
        "runs",
        "present",
        "mean",
        "sd",
        "half_width",
    ])?;
    let sections = summary
        .methods
        .iter()
        .map(|(m, r)| (m.name(), r))
        .chain(std::iter::once(("pre_pruning", &summary.pre_pruning)));
    for (method, report) in sections {
        for (key, m) in &report.metrics {
            let (metric, scope) = split_key(key);
            wtr.write_record([
                method,
                metric,
                scope,
                &report.runs.to_string(),
                &m.present.to_string(),
                &fmt_opt(m.mean),
                &fmt_opt(m.sd),
                &fmt_opt(m.half_width),
            ])?;
        }
    }
    wtr.into_inner()
        .map_err(|e| Error::io("<csv buffer>", e.into_error()))
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    status: &'a str,
    fingerprint: String,
    files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn write_manifest(dir: &Path, manifest: &Manifest<'_>) -> Result<()> {
    write_atomic(dir.join("manifest.json"), &to_json(manifest)?)
}

/// Writes per-run reports under `runs/`, `aggregate.json`, the two CSV
/// tables, and `manifest.json`. Returns the files written, relative to `dir`.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    for run in &report.runs {
        let name = format!("runs/seed-{}-{}.json", run.seed, run.method);
        write_atomic(dir.join(&name), &to_json(run)?)?;
        files.push(name);
    }
    write_atomic(dir.join("aggregate.json"), &to_json(&report.aggregate)?)?;
    write_atomic(dir.join("runs.csv"), &runs_csv(&report.runs)?)?;
    write_atomic(
        dir.join("aggregate.csv"),
        &aggregate_csv(&report.aggregate)?,
    )?;
    files.extend(["aggregate.json", "runs.csv", "aggregate.csv"].map(String::from));
    Ok(files)
}

/// Runs the experiment and writes it to `dir`. The manifest reads
/// `incomplete` until everything is on disk, and `failed` if a stage errors.
pub fn run_to_dir(config: &ExperimentConfig, dir: &Path) -> Result<ExperimentReport> {
    config.validate()?;
    let fingerprint = config.fingerprint();
    write_manifest(
        dir,
        &Manifest {
            status: "incomplete",
            fingerprint: fingerprint.clone(),
            files: vec![],
            error: None,
        },
    )?;
    let outcome = run_experiment(config).and_then(|report| {
        let files = write_report(&report, dir)?;
        Ok((report, files))
    });
    match outcome {
        Ok((report, files)) => {
            write_manifest(
                dir,
                &Manifest {
                    status: "complete",
                    fingerprint,
                    files,
                    error: None,
                },
            )?;
            Ok(report)
        }
        Err(e) => {
            write_manifest(
                dir,
                &Manifest {
                    status: "failed",
                    fingerprint,
                    files: vec![],
                    error: Some(e.to_string()),
                },
            )?;
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_json_overrides_defaults() {
        let cfg = ExperimentConfig::from_json(
            r#"{"seeds": [7, 8], "learner": {"k_cv": 3, "l2_lambda": 0.01}}"#,
        )
        .unwrap();
        assert_eq!(cfg.seeds, vec![7, 8]);
        assert_eq!(cfg.learner.k_cv, 3);
        assert_eq!(cfg.learner.l2_lambda, 0.01);
        assert_eq!(cfg.synth.n, 10_000);
        assert!(ExperimentConfig::from_json(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn config_validation() {
        let dup = ExperimentConfig {
            seeds: vec![1, 1],
            ..Default::default()
        };
        assert!(matches!(dup.validate(), Err(Error::Config(_))));
        let none = ExperimentConfig {
            methods: vec![],
            ..Default::default()
        };
        assert!(none.validate().is_err());
        let unmatched = ExperimentConfig {
            methods: vec![Method::Random],
            ..Default::default()
        };
        assert!(unmatched.validate().is_err());
        let counted = ExperimentConfig {
            methods: vec![Method::Random],
            random_budget: RandomBudget::Count(10),
            ..Default::default()
        };
        counted.validate().unwrap();
    }

    #[test]
    fn fingerprint_ignores_output_location() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            output_dir: Some("/tmp/x".into()),
            execution: Execution::Sequential,
            ..a.clone()
        };
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = ExperimentConfig {
            seeds: vec![1, 2],
            ..a.clone()
        };
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn small_experiment_runs() {
        let config = ExperimentConfig {
            synth: SynthConfig {
                n: 600,
                ..Default::default()
            },
            seeds: vec![1, 2],
            ..Default::default()
        };
        let report = run_experiment(&config).unwrap();
        assert_eq!(report.runs.len(), 6);
        let decole = report.run(1, Method::Decole).unwrap();
        assert_eq!(
            report.run(1, Method::Random).unwrap().pruned_count,
            decole.pruned_count
        );
        assert_eq!(report.aggregate.methods[&Method::Cl].runs, 2);
    }
}

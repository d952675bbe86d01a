//! Group-aware confident learning for finding and pruning biased labels.
//!
//! The crate covers the full pipeline: a two-group Gaussian benchmark with
//! group- and class-conditional label noise ([`synth`]), a logistic
//! regression base learner with stratified cross-validated probabilities
//! ([`learner`]), three pruning engines ([`prune`]): decoupled (one model and
//! one pair of thresholds per group), coupled confident learning, and random
//! pruning, plus pruning-quality and label-quality metrics with multi-seed
//! aggregation ([`eval`]) and an end-to-end experiment runner
//! ([`experiment`]).
//!
//! Data-parallel loops (cross-validation folds, groups, seeds) run on rayon
//! when the `parallel` feature is enabled. [`Execution::Sequential`] forces
//! the sequential path; both give bit-identical results.

pub mod dataset;
pub mod error;
pub mod eval;
pub mod exec;
pub mod experiment;
pub mod io;
pub mod learner;
pub mod prune;
pub mod seed;
pub mod synth;

pub use dataset::{validate, DatasetParts, ErrorMask, ErrorType, LabeledDataset};
pub use error::{Error, ErrorKind, Result};
pub use exec::Execution;
pub use io::{read_csv, write_csv};
pub use learner::{
    crossval_prob, Classifier, Learner, LogisticHyperparams, LogisticRegression, ProbEstimates,
};
pub use prune::{cl_prune, decole_prune, random_prune, retain, Method, PruneConfig, PruneResult};
pub use synth::{generate_population, inject_noise, NoiseSpec, SynthConfig};

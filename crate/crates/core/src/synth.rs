//! Two-group Gaussian cluster population and group/class-conditional label noise.

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetParts, LabeledDataset};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterMean {
    pub group: usize,
    pub class: u8,
    pub mean: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    /// Fraction of the population in group 1.
    pub majority_fraction: f64,
    pub within_group_positive_fraction: f64,
    pub cluster_means: Vec<ClusterMean>,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 10_000,
            majority_fraction: 0.7,
            within_group_positive_fraction: 0.5,
            cluster_means: vec![
                ClusterMean {
                    group: 0,
                    class: 1,
                    mean: [2.0, 3.0],
                },
                ClusterMean {
                    group: 0,
                    class: 0,
                    mean: [7.0, 4.0],
                },
                ClusterMean {
                    group: 1,
                    class: 0,
                    mean: [6.0, 3.0],
                },
                ClusterMean {
                    group: 1,
                    class: 1,
                    mean: [5.0, 7.0],
                },
            ],
            sigma: 1.2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn mean(&self, group: usize, class: u8) -> Option<[f64; 2]> {
        self.cluster_means
            .iter()
            .find(|c| c.group == group && c.class == class)
            .map(|c| c.mean)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("majority_fraction", self.majority_fraction),
            (
                "within_group_positive_fraction",
                self.within_group_positive_fraction,
            ),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Config(format!(
                    "{name} must lie in [0, 1], got {value}"
                )));
            }
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        for group in 0..2 {
            for class in 0..2u8 {
                match self.mean(group, class) {
                    Some(m) if m.iter().all(|v| v.is_finite()) => {}
                    Some(_) => {
                        return Err(Error::Config(format!(
                            "cluster mean for group {group}, class {class} is not finite"
                        )))
                    }
                    None => {
                        return Err(Error::Config(format!(
                            "cluster mean for group {group}, class {class} is missing"
                        )))
                    }
                }
            }
        }
        if self
            .cluster_means
            .iter()
            .any(|c| c.group > 1 || c.class > 1)
        {
            return Err(Error::Config(
                "cluster means are defined for groups 0/1 and classes 0/1 only".into(),
            ));
        }
        Ok(())
    }

    /// Sizes of the (group, class) cells: `[[g0c0, g0c1], [g1c0, g1c1]]`.
    pub fn cell_sizes(&self) -> [[usize; 2]; 2] {
        let n1 = round_count(self.n, self.majority_fraction);
        let mut sizes = [[0; 2]; 2];
        for (group, m) in [(0, self.n - n1), (1, n1)] {
            let positives = round_count(m, self.within_group_positive_fraction);
            sizes[group] = [m - positives, positives];
        }
        sizes
    }
}

fn round_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).min(n)
}

/// Draws the population. Gold labels are set and observed labels equal gold.
///
/// Rows are generated cell by cell and then shuffled; ids are the final row
/// positions.
pub fn generate_population(config: &SynthConfig) -> Result<LabeledDataset> {
    config.validate()?;
    let mut rng = seed::stream(config.seed, "synth/population");
    let sizes = config.cell_sizes();

    let mut rows: Vec<([f64; 2], usize, u8)> = Vec::with_capacity(config.n);
    for (group, cells) in sizes.iter().enumerate() {
        for (class, &size) in (0..2u8).zip(cells) {
            let mean = config.mean(group, class).expect("validated");
            for _ in 0..size {
                let x0: f64 = rng.sample(StandardNormal);
                let x1: f64 = rng.sample(StandardNormal);
                rows.push((
                    [mean[0] + config.sigma * x0, mean[1] + config.sigma * x1],
                    group,
                    class,
                ));
            }
        }
    }
    rows.shuffle(&mut rng);

    let n = rows.len();
    let features = Array2::from_shape_fn((n, 2), |(i, j)| rows[i].0[j]);
    let labels: Vec<u8> = rows.iter().map(|r| r.2).collect();
    DatasetParts {
        features,
        groups: rows.iter().map(|r| r.1).collect(),
        k: Some(2),
        group_values: None,
        observed: labels.clone(),
        gold: Some(labels),
        ids: (0..n).map(|i| i.to_string()).collect(),
    }
    .validate()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseRate {
    pub group: usize,
    /// Gold class whose labels get flipped.
    pub class: u8,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Flip exactly `floor(rate * m)` labels per cell of size `m`.
    #[default]
    ExactCount,
    /// Flip each label independently with probability `rate`.
    Bernoulli,
}

/// Flip rates per (group, gold class). `rate` for class 1 is P(observed = 0 | gold = 1, g);
/// for class 0 it is P(observed = 1 | gold = 0, g).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub rates: Vec<NoiseRate>,
    pub mode: NoiseMode,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::exact(&[(0, 1, 0.4), (0, 0, 0.05), (1, 0, 0.2), (1, 1, 0.05)])
    }
}

impl NoiseSpec {
    pub fn exact(rates: &[(usize, u8, f64)]) -> NoiseSpec {
        NoiseSpec {
            rates: rates
                .iter()
                .map(|&(group, class, rate)| NoiseRate { group, class, rate })
                .collect(),
            mode: NoiseMode::ExactCount,
        }
    }

    /// Same rate for every cell of `k` groups.
    pub fn uniform(k: usize, rate: f64) -> NoiseSpec {
        let cells: Vec<_> = (0..k).flat_map(|g| [(g, 0, rate), (g, 1, rate)]).collect();
        NoiseSpec::exact(&cells)
    }

    pub fn rate(&self, group: usize, class: u8) -> Option<f64> {
        self.rates
            .iter()
            .find(|r| r.group == group && r.class == class)
            .map(|r| r.rate)
    }

    pub fn validate(&self) -> Result<()> {
        for r in &self.rates {
            if !(0.0..=1.0).contains(&r.rate) {
                return Err(Error::Config(format!(
                    "noise rate for group {}, class {} must lie in [0, 1], got {}",
                    r.group, r.class, r.rate
                )));
            }
            if r.class > 1 {
                return Err(Error::Config(format!(
                    "noise class must be 0 or 1, got {}",
                    r.class
                )));
            }
        }
        Ok(())
    }
}

/// Number of labels flipped in a cell of size `m` under exact-count injection.
pub fn flip_count(rate: f64, m: usize) -> usize {
    ((rate * m as f64).floor() as usize).min(m)
}

/// Rewrites the observed column from gold according to `spec`. Features,
/// groups, and gold are untouched.
pub fn inject_noise(
    dataset: &LabeledDataset,
    spec: &NoiseSpec,
    seed: u64,
) -> Result<LabeledDataset> {
    spec.validate()?;
    let gold = dataset.require_gold()?;
    let mut rng = seed::stream(seed, "synth/noise");
    let mut observed = gold.to_vec();

    for group in 0..dataset.k() {
        for class in 0..2u8 {
            let cell: Vec<usize> = (0..dataset.n())
                .filter(|&i| dataset.groups()[i] == group && gold[i] == class)
                .collect();
            if cell.is_empty() {
                continue;
            }
            let rate = spec.rate(group, class).ok_or_else(|| {
                Error::Config(format!("no noise rate for group {group}, class {class}"))
            })?;
            match spec.mode {
                NoiseMode::ExactCount => {
                    let flips = flip_count(rate, cell.len());
                    for pick in index::sample(&mut rng, cell.len(), flips) {
                        observed[cell[pick]] = 1 - class;
                    }
                }
                NoiseMode::Bernoulli => {
                    for &i in &cell {
                        if rng.gen_bool(rate) {
                            observed[i] = 1 - class;
                        }
                    }
                }
            }
        }
    }
    dataset.with_observed(observed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_population_shape() {
        let ds = generate_population(&SynthConfig::default()).unwrap();
        assert_eq!(ds.n(), 10_000);
        assert_eq!(ds.groups().iter().filter(|&&g| g == 1).count(), 7000);
        assert_eq!(ds.observed(), ds.gold().unwrap());
        assert_eq!(SynthConfig::default().mean(0, 1), Some([2.0, 3.0]));
        assert_eq!(SynthConfig::default().mean(1, 1), Some([5.0, 7.0]));
    }

    #[test]
    fn smallest_balanced_case() {
        let config = SynthConfig {
            n: 4,
            majority_fraction: 0.5,
            ..Default::default()
        };
        let ds = generate_population(&config).unwrap();
        let gold = ds.gold().unwrap();
        let mut cells: Vec<(usize, u8)> = (0..4).map(|i| (ds.groups()[i], gold[i])).collect();
        cells.sort();
        assert_eq!(cells, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
    }

    #[test]
    fn deterministic_per_seed() {
        let config = SynthConfig {
            n: 500,
            seed: 42,
            ..Default::default()
        };
        assert_eq!(
            generate_population(&config).unwrap(),
            generate_population(&config).unwrap()
        );
        let other = SynthConfig {
            seed: 43,
            ..config.clone()
        };
        assert_ne!(
            generate_population(&config).unwrap(),
            generate_population(&other).unwrap()
        );
    }

    #[test]
    fn rejects_bad_config() {
        let bad = SynthConfig {
            sigma: 0.0,
            ..Default::default()
        };
        assert!(matches!(generate_population(&bad), Err(Error::Config(_))));
        let mut missing = SynthConfig::default();
        missing.cluster_means.pop();
        assert!(matches!(
            generate_population(&missing),
            Err(Error::Config(_))
        ));
        let bad = SynthConfig {
            majority_fraction: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_and_full_noise() {
        let ds = generate_population(&SynthConfig {
            n: 300,
            ..Default::default()
        })
        .unwrap();
        let clean = inject_noise(&ds, &NoiseSpec::uniform(2, 0.0), 1).unwrap();
        assert_eq!(clean.observed(), ds.gold().unwrap());
        let flipped = inject_noise(&ds, &NoiseSpec::uniform(2, 1.0), 1).unwrap();
        for (o, g) in flipped.observed().iter().zip(ds.gold().unwrap()) {
            assert_eq!(*o, 1 - g);
        }
        assert_eq!(flipped.features(), ds.features());
    }

    #[test]
    fn noise_needs_gold_and_rates() {
        let ds = generate_population(&SynthConfig {
            n: 40,
            ..Default::default()
        })
        .unwrap();
        let no_gold = ds.with_gold(None).unwrap();
        assert!(matches!(
            inject_noise(&no_gold, &NoiseSpec::default(), 0),
            Err(Error::MissingGold)
        ));
        let partial = NoiseSpec::exact(&[(0, 0, 0.1), (0, 1, 0.1)]);
        assert!(matches!(
            inject_noise(&ds, &partial, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn bernoulli_mode_flips_roughly_rate() {
        let ds = generate_population(&SynthConfig {
            n: 20_000,
            ..Default::default()
        })
        .unwrap();
        let spec = NoiseSpec {
            mode: NoiseMode::Bernoulli,
            ..NoiseSpec::uniform(2, 0.3)
        };
        let noisy = inject_noise(&ds, &spec, 9).unwrap();
        let flips = noisy.error_mask().unwrap().error_count() as f64 / 20_000.0;
        assert!((flips - 0.3).abs() < 0.02, "{flips}");
    }
}

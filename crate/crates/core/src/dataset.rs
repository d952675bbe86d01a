//! The labeled dataset shared by every stage, and the gold-vs-observed error mask.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unvalidated dataset columns. Turn into a [`LabeledDataset`] with [`DatasetParts::validate`].
#[derive(Debug, Clone, Default)]
pub struct DatasetParts {
    pub features: Array2<f64>,
    pub groups: Vec<usize>,
    /// Number of declared groups. `None` means `max(groups) + 1`.
    pub k: Option<usize>,
    /// Original value of each dense group index. `None` means the identity.
    pub group_values: Option<Vec<u64>>,
    pub observed: Vec<u8>,
    pub gold: Option<Vec<u8>>,
    pub ids: Vec<String>,
}

impl DatasetParts {
    pub fn validate(self) -> Result<LabeledDataset> {
        let n = self.features.nrows();
        check_len("groups", n, self.groups.len())?;
        check_len("observed", n, self.observed.len())?;
        check_len("ids", n, self.ids.len())?;
        if let Some(gold) = &self.gold {
            check_len("gold", n, gold.len())?;
        }

        let k = match (self.k, &self.group_values) {
            (Some(k), _) => k,
            (None, Some(values)) => values.len(),
            (None, None) => self.groups.iter().max().map_or(0, |g| g + 1),
        };
        let group_values = self.group_values.unwrap_or_else(|| (0..k as u64).collect());
        check_len("group_values", k, group_values.len())?;

        for (row, &group) in self.groups.iter().enumerate() {
            if group >= k {
                return Err(Error::GroupOutOfRange { row, group, k });
            }
        }
        check_binary("observed", &self.observed)?;
        if let Some(gold) = &self.gold {
            check_binary("gold", gold)?;
        }
        for (row, values) in self.features.axis_iter(Axis(0)).enumerate() {
            if let Some(column) = values.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row, column });
            }
        }

        Ok(LabeledDataset {
            features: self.features,
            groups: self.groups,
            group_values,
            observed: self.observed,
            gold: self.gold,
            ids: self.ids,
        })
    }
}

fn check_len(field: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::LengthMismatch {
            field,
            expected,
            found,
        });
    }
    Ok(())
}

fn check_binary(field: &'static str, labels: &[u8]) -> Result<()> {
    match labels.iter().position(|&y| y > 1) {
        Some(row) => Err(Error::NonBinaryLabel {
            field,
            row,
            value: labels[row] as i64,
        }),
        None => Ok(()),
    }
}

/// Features, group memberships, observed labels, and (optionally) gold labels
/// for `n` instances. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    groups: Vec<usize>,
    group_values: Vec<u64>,
    observed: Vec<u8>,
    gold: Option<Vec<u8>>,
    ids: Vec<String>,
}

impl LabeledDataset {
    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn k(&self) -> usize {
        self.group_values.len()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_values(&self) -> &[u64] {
        &self.group_values
    }

    pub fn observed(&self) -> &[u8] {
        &self.observed
    }

    pub fn gold(&self) -> Option<&[u8]> {
        self.gold.as_deref()
    }

    pub fn require_gold(&self) -> Result<&[u8]> {
        self.gold().ok_or(Error::MissingGold)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Row indices belonging to `group`, in dataset order.
    pub fn rows_of_group(&self, group: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.groups[i] == group).collect()
    }

    /// Rows at `rows` in the given order. Group declarations are kept.
    pub fn select(&self, rows: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), rows),
            groups: rows.iter().map(|&i| self.groups[i]).collect(),
            group_values: self.group_values.clone(),
            observed: rows.iter().map(|&i| self.observed[i]).collect(),
            gold: self
                .gold
                .as_ref()
                .map(|gold| rows.iter().map(|&i| gold[i]).collect()),
            ids: rows.iter().map(|&i| self.ids[i].clone()).collect(),
        }
    }

    /// Copy with the observed column replaced.
    pub fn with_observed(&self, observed: Vec<u8>) -> Result<LabeledDataset> {
        check_len("observed", self.n(), observed.len())?;
        check_binary("observed", &observed)?;
        Ok(LabeledDataset {
            observed,
            ..self.clone()
        })
    }

    /// Copy with the gold column replaced (or removed).
    pub fn with_gold(&self, gold: Option<Vec<u8>>) -> Result<LabeledDataset> {
        if let Some(gold) = &gold {
            check_len("gold", self.n(), gold.len())?;
            check_binary("gold", gold)?;
        }
        Ok(LabeledDataset {
            gold,
            ..self.clone()
        })
    }

    /// Map from id to row index. Fails on duplicate ids.
    pub fn id_index(&self) -> Result<std::collections::HashMap<&str, usize>> {
        let mut index = std::collections::HashMap::with_capacity(self.n());
        for (row, id) in self.ids.iter().enumerate() {
            if index.insert(id.as_str(), row).is_some() {
                return Err(Error::DuplicateId {
                    row,
                    id: id.clone(),
                });
            }
        }
        Ok(index)
    }

    pub fn error_mask(&self) -> Result<ErrorMask> {
        ErrorMask::from_labels(&self.observed, self.require_gold()?)
    }
}

/// Free-function form of [`DatasetParts::validate`].
pub fn validate(parts: DatasetParts) -> Result<LabeledDataset> {
    parts.validate()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorType {
    /// Observed 1, gold 0.
    FalsePositive,
    /// Observed 0, gold 1.
    FalseNegative,
    #[serde(rename = "none")]
    Clean,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorMask {
    pub is_error: Vec<bool>,
    pub error_type: Vec<ErrorType>,
}

impl ErrorMask {
    pub fn from_labels(observed: &[u8], gold: &[u8]) -> Result<ErrorMask> {
        check_len("gold", observed.len(), gold.len())?;
        let error_type: Vec<ErrorType> = observed
            .iter()
            .zip(gold)
            .map(|(&o, &g)| match (o, g) {
                (1, 0) => ErrorType::FalsePositive,
                (0, 1) => ErrorType::FalseNegative,
                _ => ErrorType::Clean,
            })
            .collect();
        let is_error = error_type.iter().map(|&t| t != ErrorType::Clean).collect();
        Ok(ErrorMask {
            is_error,
            error_type,
        })
    }

    pub fn len(&self) -> usize {
        self.is_error.len()
    }

    pub fn is_empty(&self) -> bool {
        self.is_error.is_empty()
    }

    pub fn error_count(&self) -> usize {
        self.is_error.iter().filter(|&&e| e).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn parts() -> DatasetParts {
        DatasetParts {
            features: array![[0.0, 1.0], [1.0, 2.0], [2.0, 3.0], [3.0, 4.0]],
            groups: vec![0, 1, 0, 1],
            observed: vec![1, 0, 1, 0],
            gold: Some(vec![1, 1, 0, 0]),
            ids: (0..4).map(|i| format!("r{i}")).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn accepts_well_formed() {
        let ds = validate(parts()).unwrap();
        assert_eq!((ds.n(), ds.d(), ds.k()), (4, 2, 2));
    }

    #[test]
    fn rejects_label_two_with_row() {
        let mut p = parts();
        p.observed[3] = 2;
        let err = validate(p).unwrap_err();
        assert!(matches!(
            err,
            Error::NonBinaryLabel {
                row: 3,
                value: 2,
                ..
            }
        ));
        assert!(err.to_string().contains("row 3"));
    }

    #[test]
    fn rejects_short_groups() {
        let mut p = parts();
        p.groups.pop();
        assert!(matches!(
            validate(p),
            Err(Error::LengthMismatch {
                field: "groups",
                expected: 4,
                found: 3
            })
        ));
    }

    #[test]
    fn rejects_group_out_of_range_and_nan() {
        let mut p = parts();
        p.k = Some(1);
        assert!(matches!(
            validate(p),
            Err(Error::GroupOutOfRange {
                row: 1,
                group: 1,
                k: 1
            })
        ));

        let mut p = parts();
        p.features[[2, 1]] = f64::NAN;
        assert!(matches!(
            validate(p),
            Err(Error::NonFiniteFeature { row: 2, column: 1 })
        ));
    }

    #[test]
    fn error_mask_unrolled() {
        let mask = validate(parts()).unwrap().error_mask().unwrap();
        assert_eq!(mask.is_error, vec![false, true, true, false]);
        assert_eq!(
            mask.error_type,
            vec![
                ErrorType::Clean,
                ErrorType::FalseNegative,
                ErrorType::FalsePositive,
                ErrorType::Clean
            ]
        );
    }

    #[test]
    fn error_mask_identity_and_complement() {
        let gold = vec![1, 0, 0, 1, 1];
        let same = ErrorMask::from_labels(&gold, &gold).unwrap();
        assert!(same.error_type.iter().all(|&t| t == ErrorType::Clean));

        let flipped: Vec<u8> = gold.iter().map(|g| 1 - g).collect();
        let all = ErrorMask::from_labels(&flipped, &gold).unwrap();
        assert!(all.is_error.iter().all(|&e| e));
        for (t, g) in all.error_type.iter().zip(&gold) {
            let expected = if *g == 1 {
                ErrorType::FalseNegative
            } else {
                ErrorType::FalsePositive
            };
            assert_eq!(*t, expected);
        }
    }

    #[test]
    fn error_mask_requires_gold() {
        let mut p = parts();
        p.gold = None;
        assert!(matches!(
            validate(p).unwrap().error_mask(),
            Err(Error::MissingGold)
        ));
    }

    #[test]
    fn select_keeps_order_and_groups() {
        let ds = validate(parts()).unwrap();
        let sub = ds.select(&[3, 0]);
        assert_eq!(sub.ids(), &["r3".to_string(), "r0".to_string()]);
        assert_eq!(sub.k(), 2);
        let empty = ds.select(&[]);
        assert_eq!((empty.n(), empty.d()), (0, 2));
    }
}

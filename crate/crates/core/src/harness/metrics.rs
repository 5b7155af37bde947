use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stats::{mean, median};
use crate::{Error, Result};

pub const NUM_CLASSES: usize = 4;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`.
    pub counts: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut m = Self::default();
        for (t, p) in pairs {
            if t >= NUM_CLASSES || p >= NUM_CLASSES {
                return Err(Error::InvalidArgument(format!("class pair ({t}, {p}) out of range")));
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> [usize; NUM_CLASSES] {
        self.counts.map(|r| r.iter().sum())
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum::<usize>() as f64 / total as f64
    }

    /// Share of misclassifications landing on a texture with adjacent bump spacing.
    pub fn adjacent_error_share(&self) -> Option<f64> {
        let mut errors = 0;
        let mut adjacent = 0;
        for t in 0..NUM_CLASSES {
            for p in 0..NUM_CLASSES {
                if t != p {
                    errors += self.counts[t][p];
                    if t.abs_diff(p) == 1 {
                        adjacent += self.counts[t][p];
                    }
                }
            }
        }
        (errors > 0).then(|| adjacent as f64 / errors as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
}

impl ErrorSummary {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        Ok(Self {
            count: errors.len(),
            mean: mean(errors).ok_or_else(|| Error::Empty("no errors to summarize".into()))?,
            median: median(errors).expect("non-empty"),
        })
    }
}

/// Euclidean distance between predicted and labeled positions.
pub fn position_error(pred: &[f64], label: &[f64; 2]) -> f64 {
    (pred[0] - label[0]).hypot(pred[1] - label[1])
}

/// Nearest point of the 5 mm/s grid.
pub fn velocity_bin(v: f64) -> f64 {
    (v / 5.0).round() * 5.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub bin_mm_s: f64,
    pub errors: ErrorSummary,
}

/// Absolute errors grouped by 5 mm/s bins of `velocities`; empty bins are omitted.
pub fn binned_errors(velocities: &[f64], errors: &[f64]) -> Result<Vec<BinSummary>> {
    let mut bins: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for (&v, &e) in velocities.iter().zip(errors) {
        bins.entry(velocity_bin(v) as i64).or_default().push(e);
    }
    bins.into_iter()
        .map(|(b, e)| {
            Ok(BinSummary {
                bin_mm_s: b as f64,
                errors: ErrorSummary::from_errors(&e)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_classifier() {
        let pairs = (0..40).map(|i| (i % 4, i % 4));
        let m = ConfusionMatrix::from_pairs(pairs).unwrap();
        assert_eq!(m.accuracy(), 1.0);
        assert_eq!(m.row_sums(), [10; 4]);
        assert_eq!(m.adjacent_error_share(), None);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.counts[i][j] == 0, i != j);
            }
        }
    }

    #[test]
    fn adjacency_share() {
        let m = ConfusionMatrix::from_pairs([(0, 1), (1, 1), (2, 0), (3, 2)]).unwrap();
        assert_eq!(m.accuracy(), 0.25);
        assert!((m.adjacent_error_share().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn bins() {
        assert_eq!(velocity_bin(42.4), 40.0);
        assert_eq!(velocity_bin(42.6), 45.0);
        let b = binned_errors(&[20.0, 21.0, 40.0], &[1.0, 3.0, 0.0]).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].bin_mm_s, 20.0);
        assert_eq!(b[0].errors.mean, 2.0);
        assert_eq!(b[1].errors.median, 0.0);
    }

    #[test]
    fn euclidean() {
        assert_eq!(position_error(&[3.0, 4.0], &[0.0, 0.0]), 5.0);
        assert_eq!(position_error(&[1.0, 1.0], &[1.0, 1.0]), 0.0);
        assert!(ErrorSummary::from_errors(&[]).is_err());
    }
}

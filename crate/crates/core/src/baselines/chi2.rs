use std::collections::BTreeSet;

use super::BaselineOutcome;
use super::special::chi2_sf;
use crate::error::{Error, Result};
use crate::kstest::check_alpha;

/// Validation label frequencies.
///
/// Labels never predicted on the validation set are pooled into one catch-all
/// bin carrying a single pseudo-count, so no expected count is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelFrequencyModel {
    /// Per-label frequency; zero for labels folded into the catch-all bin.
    pub frequencies: Vec<f64>,
    pub merged_other: BTreeSet<usize>,
    /// Frequency of the catch-all bin (zero when nothing was merged).
    pub other_frequency: f64,
}

impl LabelFrequencyModel {
    pub fn calibrate(labels: &[usize], label_count: usize) -> Result<Self> {
        if label_count == 0 {
            return Err(Error::InvalidParameter("label count must be positive".into()));
        }
        if labels.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let mut counts = vec![0u64; label_count];
        for &l in labels {
            if l >= label_count {
                return Err(Error::Domain(format!("label {l} not below {label_count}")));
            }
            counts[l] += 1;
        }
        let merged_other: BTreeSet<usize> = (0..label_count).filter(|&j| counts[j] == 0).collect();
        let pseudo = if merged_other.is_empty() { 0.0 } else { 1.0 };
        let total = labels.len() as f64 + pseudo;
        let frequencies = counts.iter().map(|&c| c as f64 / total).collect();
        Ok(Self {
            frequencies,
            merged_other,
            other_frequency: pseudo / total,
        })
    }

    pub fn from_parts(frequencies: Vec<f64>, merged_other: BTreeSet<usize>, other_frequency: f64) -> Result<Self> {
        let model = Self {
            frequencies,
            merged_other,
            other_frequency,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let k = self.frequencies.len();
        if k == 0 {
            return Err(Error::InvalidParameter("empty frequency table".into()));
        }
        for (j, &f) in self.frequencies.iter().enumerate() {
            let merged = self.merged_other.contains(&j);
            if merged && f != 0.0 || !merged && !(f > 0.0) {
                return Err(Error::InvalidParameter(format!("bad frequency {f} for label {j}")));
            }
        }
        if self.merged_other.iter().any(|&j| j >= k) {
            return Err(Error::InvalidParameter("merged label out of range".into()));
        }
        if self.merged_other.is_empty() != (self.other_frequency == 0.0) {
            return Err(Error::InvalidParameter("catch-all frequency inconsistent with merged set".into()));
        }
        let sum = self.frequencies.iter().sum::<f64>() + self.other_frequency;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("frequencies sum to {sum}")));
        }
        Ok(())
    }

    pub fn label_count(&self) -> usize {
        self.frequencies.len()
    }

    /// Number of bins the test uses, including the catch-all.
    pub fn bin_count(&self) -> usize {
        self.frequencies.len() - self.merged_other.len() + usize::from(!self.merged_other.is_empty())
    }

    /// Pearson goodness-of-fit test of a batch of predicted labels.
    pub fn chi2_test(&self, batch_labels: &[usize], alpha: f64) -> Result<BaselineOutcome> {
        check_alpha(alpha)?;
        if batch_labels.is_empty() {
            return Err(Error::InvalidParameter("empty batch".into()));
        }
        let k = self.label_count();
        let mut observed = vec![0u64; k];
        for &l in batch_labels {
            if l >= k {
                return Err(Error::Domain(format!("label {l} not below {k}")));
            }
            observed[l] += 1;
        }
        let m = batch_labels.len() as f64;
        let mut statistic = 0.0;
        let mut other_observed = 0u64;
        for (j, (&o, &f)) in observed.iter().zip(&self.frequencies).enumerate() {
            if self.merged_other.contains(&j) {
                other_observed += o;
            } else {
                let expected = m * f;
                statistic += (o as f64 - expected).powi(2) / expected;
            }
        }
        if !self.merged_other.is_empty() {
            let expected = m * self.other_frequency;
            statistic += (other_observed as f64 - expected).powi(2) / expected;
        }
        let df = self.bin_count() - 1;
        let p_value = if df == 0 { 1.0 } else { chi2_sf(statistic, df)? };
        Ok(BaselineOutcome {
            test: "chi2".into(),
            statistic,
            lower: None,
            upper: None,
            p_value: Some(p_value),
            positive: p_value < alpha,
            m: batch_labels.len(),
            alpha,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;

    #[test]
    fn proportional_batch() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let model = LabelFrequencyModel::calibrate(&labels, 4).unwrap();
        let out = model.chi2_test(&[0, 1, 2, 3, 0, 1, 2, 3], 0.01).unwrap();
        assert_eq!(out.statistic, 0.0);
        assert_eq!(out.p_value, Some(1.0));
        assert!(!out.positive);
    }

    #[test]
    fn two_label_example() {
        let model = LabelFrequencyModel::calibrate(&[0, 1], 2).unwrap();
        let mut batch = vec![0; 70];
        batch.extend(vec![1; 30]);
        let out = model.chi2_test(&batch, 0.01).unwrap();
        assert_eq!(out.statistic, 16.0);
        assert!((out.p_value.unwrap() - 6.334_248_366_623_996e-5).abs() < 1e-15);
        assert!(out.positive);
    }

    #[test]
    fn unseen_labels_are_merged() {
        let model = LabelFrequencyModel::calibrate(&[0, 0, 1, 1], 5).unwrap();
        assert_eq!(model.merged_other, BTreeSet::from([2, 3, 4]));
        assert_eq!(model.other_frequency, 0.2);
        assert_eq!(model.frequencies, vec![0.4, 0.4, 0.0, 0.0, 0.0]);
        assert_eq!(model.bin_count(), 3);
        let sum: f64 = model.frequencies.iter().sum::<f64>() + model.other_frequency;
        assert!((sum - 1.0).abs() < 1e-12);
        let out = model.chi2_test(&[0, 1, 4, 4, 3], 0.01).unwrap();
        assert!(out.statistic.is_finite());
    }

    #[test]
    fn out_of_range_label() {
        let model = LabelFrequencyModel::calibrate(&[0, 1], 2).unwrap();
        assert!(matches!(model.chi2_test(&[0, 2], 0.01), Err(Error::Domain(_))));
        assert!(LabelFrequencyModel::calibrate(&[3], 2).is_err());
    }

    #[test]
    fn single_bin_never_alarms() {
        let model = LabelFrequencyModel::calibrate(&[0, 0, 0], 1).unwrap();
        let out = model.chi2_test(&[0, 0], 0.5).unwrap();
        assert!(!out.positive);
    }

    #[test]
    fn from_parts_validates() {
        assert!(LabelFrequencyModel::from_parts(vec![0.5, 0.5], BTreeSet::new(), 0.0).is_ok());
        assert!(LabelFrequencyModel::from_parts(vec![0.5, 0.4], BTreeSet::new(), 0.0).is_err());
        assert!(LabelFrequencyModel::from_parts(vec![0.5, 0.0], BTreeSet::new(), 0.5).is_err());
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            cal in prop::collection::vec(0usize..8, 1..200),
            mut batch in prop::collection::vec(0usize..8, 1..100),
            seed in any::<u64>(),
        ) {
            let model = LabelFrequencyModel::calibrate(&cal, 8).unwrap();
            let a = model.chi2_test(&batch, 0.05).unwrap();
            batch.shuffle(&mut rng::seeded(seed));
            let b = model.chi2_test(&batch, 0.05).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

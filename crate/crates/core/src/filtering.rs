//! Picking a small, suspicious subset out of an alarmed batch.
//!
//! Within-specs samples uniformize to a flat density, so they spread evenly
//! over equal-width bins. The most crowded bin is where unexpected samples
//! concentrate, and it is where the subset is drawn from.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationModel, ScoreSample};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedSample {
    pub id: String,
    pub confidence: f64,
    pub uniformized: f64,
    pub bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    /// Selection in batch order.
    pub selected: Vec<SelectedSample>,
    pub bin_index: usize,
    pub bin_count: usize,
    pub bin_total: usize,
    /// Top-bin count over the count a flat density would give.
    pub estimated_enrichment: f64,
}

impl FilterResult {
    pub fn selected_ids(&self) -> Vec<&str> {
        self.selected.iter().map(|s| s.id.as_str()).collect()
    }
}

fn check_subset_size(w: usize, m: usize) -> Result<()> {
    if w < 1 || w > m {
        return Err(Error::InvalidParameter(format!(
            "subset size {w} must be between 1 and the batch size {m}"
        )));
    }
    Ok(())
}

/// Bin of a uniformized value among `bins` equal-width bins; 1.0 goes last.
pub fn bin_of(u: f64, bins: usize) -> usize {
    ((u * bins as f64) as usize).min(bins - 1)
}

/// Select `w` samples from the most populated of `⌈m/w⌉` uniform bins.
///
/// Ties between bins go to the lower index. When the top bin holds more than
/// `w` samples a uniformly random `w` of them are kept; when it holds fewer,
/// the remainder comes from the next bins in descending count order.
pub fn filter_suspicious(
    model: &CalibrationModel,
    batch: &[ScoreSample],
    w: usize,
    seed: u64,
) -> Result<FilterResult> {
    let m = batch.len();
    check_subset_size(w, m)?;
    let bin_total = m.div_ceil(w);

    let uniformized = batch
        .iter()
        .map(|s| model.uniformize(s.confidence))
        .collect::<Result<Vec<_>>>()?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); bin_total];
    for (i, &u) in uniformized.iter().enumerate() {
        members[bin_of(u, bin_total)].push(i);
    }

    let mut ranking: Vec<usize> = (0..bin_total).collect();
    ranking.sort_by(|&a, &b| members[b].len().cmp(&members[a].len()).then(a.cmp(&b)));
    let top = ranking[0];
    let top_count = members[top].len();

    let mut rng = rng::seeded(seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(w);
    for &bin in &ranking {
        let need = w - chosen.len();
        if need == 0 {
            break;
        }
        let pool = &members[bin];
        if pool.len() <= need {
            chosen.extend_from_slice(pool);
        } else {
            chosen.extend(index::sample(&mut rng, pool.len(), need).iter().map(|j| pool[j]));
        }
    }
    chosen.sort_unstable();

    let selected = chosen
        .into_iter()
        .map(|i| SelectedSample {
            id: batch[i].id.clone(),
            confidence: batch[i].confidence,
            uniformized: uniformized[i],
            bin: bin_of(uniformized[i], bin_total),
        })
        .collect();
    Ok(FilterResult {
        selected,
        bin_index: top,
        bin_count: top_count,
        bin_total,
        estimated_enrichment: top_count as f64 / (m as f64 / bin_total as f64),
    })
}

/// Ids of the `w` lowest raw confidences, ties broken by id.
pub fn lowest_confidence_baseline(batch: &[ScoreSample], w: usize) -> Result<Vec<String>> {
    check_subset_size(w, batch.len())?;
    let mut order: Vec<&ScoreSample> = batch.iter().collect();
    order.sort_by(|a, b| a.confidence.total_cmp(&b.confidence).then_with(|| a.id.cmp(&b.id)));
    Ok(order.into_iter().take(w).map(|s| s.id.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::ModelMeta;
    use proptest::prelude::*;
    use std::collections::HashSet;

    /// Breakpoints at k/(n+1): uniformize is the identity up to grid effects.
    fn identity_model(n: usize) -> CalibrationModel {
        let z: Vec<f64> = (1..=n).map(|k| k as f64 / (n + 1) as f64).collect();
        CalibrationModel::from_breakpoints(z, ModelMeta::default()).unwrap()
    }

    fn samples(conf: &[f64]) -> Vec<ScoreSample> {
        conf.iter()
            .enumerate()
            .map(|(i, &c)| ScoreSample::new(format!("s{i:04}"), None, c).unwrap())
            .collect()
    }

    #[test]
    fn bin_layout() {
        let model = identity_model(999);
        let batch = samples(&vec![0.5; 100]);
        let r = filter_suspicious(&model, &batch, 10, 0).unwrap();
        assert_eq!(r.bin_total, 10);
        assert_eq!(bin_of(1.0, 10), 9);
        assert_eq!(bin_of(0.0, 10), 0);
        assert_eq!(bin_of(0.1, 10), 1);
    }

    #[test]
    fn crowded_bin_is_found() {
        let model = identity_model(999);
        let mut conf: Vec<f64> = (0..40).map(|i| 0.001 + 0.002 * i as f64).collect();
        // 60 more spread over bins 1..9, under 40 each.
        conf.extend((0..60).map(|i| 0.1 + 0.9 * (i as f64 + 0.5) / 60.0));
        let batch = samples(&conf);
        let r = filter_suspicious(&model, &batch, 10, 5).unwrap();
        assert_eq!(r.bin_index, 0);
        assert_eq!(r.bin_count, 40);
        assert_eq!(r.estimated_enrichment, 4.0);
        assert_eq!(r.selected.len(), 10);
        assert!(r.selected.iter().all(|s| s.bin == 0 && s.confidence < 0.1));
    }

    #[test]
    fn shortfall_is_filled() {
        // m=5, w=4: two bins; the top one can hold only 3.
        let model = identity_model(999);
        let batch = samples(&[0.1, 0.2, 0.3, 0.7, 0.8]);
        let r = filter_suspicious(&model, &batch, 4, 1).unwrap();
        assert_eq!(r.bin_total, 2);
        assert_eq!(r.bin_index, 0);
        assert_eq!(r.bin_count, 3);
        assert_eq!(r.selected.len(), 4);
        assert_eq!(r.selected.iter().filter(|s| s.bin == 0).count(), 3);
    }

    #[test]
    fn ties_prefer_lower_bin() {
        let model = identity_model(999);
        let batch = samples(&[0.1, 0.2, 0.7, 0.8]);
        let r = filter_suspicious(&model, &batch, 2, 1).unwrap();
        assert_eq!(r.bin_index, 0);
        assert_eq!(r.selected_ids(), vec!["s0000", "s0001"]);
    }

    #[test]
    fn subset_size_errors() {
        let model = identity_model(9);
        let batch = samples(&[0.1, 0.2]);
        assert!(matches!(filter_suspicious(&model, &batch, 0, 0), Err(Error::InvalidParameter(_))));
        assert!(matches!(filter_suspicious(&model, &batch, 3, 0), Err(Error::InvalidParameter(_))));
        assert!(lowest_confidence_baseline(&batch, 3).is_err());
        assert!(lowest_confidence_baseline(&batch, 0).is_err());
    }

    #[test]
    fn lowest_confidence() {
        let batch = samples(&[0.9, 0.1, 0.5, 0.3]);
        assert_eq!(lowest_confidence_baseline(&batch, 2).unwrap(), vec!["s0001", "s0003"]);
        assert_eq!(lowest_confidence_baseline(&batch, 4).unwrap().len(), 4);
        let tied = vec![
            ScoreSample::new("b", None, 0.2).unwrap(),
            ScoreSample::new("a", None, 0.2).unwrap(),
            ScoreSample::new("c", None, 0.1).unwrap(),
        ];
        assert_eq!(lowest_confidence_baseline(&tied, 2).unwrap(), vec!["c", "a"]);
    }

    proptest! {
        #[test]
        fn selection_contract(
            conf in prop::collection::vec(0.0f64..=1.0, 1..300),
            w_frac in 0.0f64..1.0,
            seed in any::<u64>(),
        ) {
            let model = identity_model(499);
            let batch = samples(&conf);
            let m = batch.len();
            let w = 1 + ((m - 1) as f64 * w_frac) as usize;
            let r = filter_suspicious(&model, &batch, w, seed).unwrap();
            prop_assert_eq!(r.selected.len(), w);
            let ids: HashSet<&str> = r.selected.iter().map(|s| s.id.as_str()).collect();
            prop_assert_eq!(ids.len(), w);
            let all: HashSet<&str> = batch.iter().map(|s| s.id.as_str()).collect();
            prop_assert!(ids.is_subset(&all));
            prop_assert_eq!(r.bin_total, m.div_ceil(w));
            prop_assert_eq!(&r, &filter_suspicious(&model, &batch, w, seed).unwrap());
            let counts = {
                let mut c = vec![0usize; r.bin_total];
                for s in &batch {
                    c[bin_of(model.uniformize(s.confidence).unwrap(), r.bin_total)] += 1;
                }
                c
            };
            prop_assert_eq!(r.bin_count, *counts.iter().max().unwrap());
        }
    }
}

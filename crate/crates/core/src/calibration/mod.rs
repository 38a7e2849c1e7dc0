//! Within-specs reference distribution.
//!
//! A [`CalibrationModel`] holds the sorted, distinct validation confidences
//! `Z_1 < ... < Z_n`. Together with the virtual endpoints `Z_0 = 0` and
//! `Z_{n+1} = 1` they define a piecewise-linear map from confidence to
//! quantile level ([`CalibrationModel::uniformize`]). Within-specs
//! confidences pushed through this map are approximately uniform on `[0, 1]`.
//!
//! For very large or streaming validation sets, [`QuantileSketch`] keeps a
//! constant-size summary that can later be turned into a model.

mod sketch;

use std::collections::HashSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use sketch::{Centroid, QuantileSketch, DEFAULT_COMPRESSION};

/// Default jitter magnitude used to break ties.
pub const DEFAULT_JITTER_EPS: f64 = 1e-9;

/// One classifier output event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSample {
    pub id: String,
    #[serde(default)]
    pub label: Option<usize>,
    pub confidence: f64,
}

impl ScoreSample {
    pub fn new(id: impl Into<String>, label: Option<usize>, confidence: f64) -> Result<Self> {
        check_unit(confidence, "confidence")?;
        Ok(Self {
            id: id.into(),
            label,
            confidence,
        })
    }

    pub fn check_label(&self, label_count: usize) -> Result<()> {
        match self.label {
            Some(l) if l >= label_count => Err(Error::Domain(format!(
                "label {l} of sample {:?} not below label count {label_count}",
                self.id
            ))),
            _ => Ok(()),
        }
    }
}

pub(crate) fn check_unit(value: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} {value} not in [0, 1]")))
    }
}

/// Tie-breaking parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JitterParams {
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for JitterParams {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_JITTER_EPS,
            seed: 0,
        }
    }
}

/// Provenance carried along with a model.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    /// Caller-supplied creation stamp. Left empty unless given, so that
    /// rebuilding from the same input produces the same bytes.
    pub created: Option<String>,
    pub source: String,
    pub jitter: JitterParams,
}

/// Make all values distinct and strictly interior to `(0, 1)`.
///
/// Values that are unique and already interior are returned unchanged. Every
/// member of a tied group, and every value sitting on 0 or 1, is redrawn
/// uniformly from the open window `(v - epsilon, v + epsilon) ∩ (0, 1)`,
/// avoiding every other output value. Output order follows input order.
pub fn dedupe_jitter(scores: &[f64], epsilon: f64, seed: u64) -> Result<Vec<f64>> {
    if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "jitter epsilon {epsilon} must be in (0, 1)"
        )));
    }
    for &s in scores {
        check_unit(s, "score")?;
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));

    let mut out = scores.to_vec();
    let mut taken: HashSet<u64> = HashSet::with_capacity(scores.len());
    let mut groups: Vec<&[usize]> = Vec::new();

    for group in order.chunk_by(|&a, &b| scores[a] == scores[b]) {
        let v = scores[group[0]];
        if group.len() == 1 && v > 0.0 && v < 1.0 {
            taken.insert(v.to_bits());
        } else {
            groups.push(group);
        }
    }

    let mut rng = rng::seeded(seed);
    for group in groups {
        let v = scores[group[0]];
        let lo = (v - epsilon).max(0.0);
        let hi = (v + epsilon).min(1.0);
        let room = floats_strictly_between(lo, hi);
        if (group.len() as u64) > room {
            return Err(Error::InvalidParameter(format!(
                "cannot separate {} copies of {v} within epsilon {epsilon}: only {room} representable values",
                group.len()
            )));
        }
        for &idx in group {
            let mut placed = None;
            for _ in 0..256 {
                let x = lo + rng.r#gen::<f64>() * (hi - lo);
                if x > lo && x < hi && !taken.contains(&x.to_bits()) {
                    placed = Some(x);
                    break;
                }
            }
            // Dense windows (tiny epsilon) fall back to a linear scan.
            let x = match placed {
                Some(x) => x,
                None => first_free_between(lo, hi, &taken).ok_or_else(|| {
                    Error::InvalidParameter(format!(
                        "cannot separate copies of {v} within epsilon {epsilon}"
                    ))
                })?,
            };
            taken.insert(x.to_bits());
            out[idx] = x;
        }
    }
    Ok(out)
}

fn floats_strictly_between(lo: f64, hi: f64) -> u64 {
    // Both bounds are non-negative, so bit patterns order like the values.
    hi.to_bits().saturating_sub(lo.to_bits()).saturating_sub(1)
}

fn first_free_between(lo: f64, hi: f64, taken: &HashSet<u64>) -> Option<f64> {
    (lo.to_bits() + 1..hi.to_bits())
        .find(|b| !taken.contains(b))
        .map(f64::from_bits)
}

/// Empirical within-specs reference.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationModel {
    breakpoints: Vec<f64>,
    meta: ModelMeta,
}

impl CalibrationModel {
    /// Sort and de-duplicate validation confidences into a model.
    pub fn build(scores: &[f64], jitter: JitterParams) -> Result<Self> {
        Self::build_with_source(scores, jitter, String::new())
    }

    pub fn build_with_source(scores: &[f64], jitter: JitterParams, source: String) -> Result<Self> {
        if scores.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: scores.len(),
            });
        }
        let mut breakpoints = dedupe_jitter(scores, jitter.epsilon, jitter.seed)?;
        breakpoints.sort_by(f64::total_cmp);
        Ok(Self {
            breakpoints,
            meta: ModelMeta {
                created: None,
                source,
                jitter,
            },
        })
    }

    /// Rebuild from stored breakpoints, validating the model invariants.
    pub fn from_breakpoints(breakpoints: Vec<f64>, meta: ModelMeta) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: breakpoints.len(),
            });
        }
        if let Some(bad) = breakpoints.iter().find(|&&z| !(z > 0.0 && z < 1.0)) {
            return Err(Error::Domain(format!("breakpoint {bad} not in (0, 1)")));
        }
        if let Some(w) = breakpoints.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(format!(
                "breakpoints not strictly increasing at {} >= {}",
                w[0], w[1]
            )));
        }
        Ok(Self { breakpoints, meta })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn n(&self) -> usize {
        self.breakpoints.len()
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut ModelMeta {
        &mut self.meta
    }

    /// Map a confidence to its calibrated quantile level.
    ///
    /// On segment `[Z_k, Z_{k+1}]` this is `k/n + (p - Z_k) / (n (Z_{k+1} - Z_k))`.
    /// A breakpoint `Z_k` maps to exactly `k/n`; everything at or above `Z_n`
    /// maps to 1.
    pub fn uniformize(&self, p: f64) -> Result<f64> {
        check_unit(p, "confidence")?;
        Ok(self.uniformize_unchecked(p))
    }

    pub(crate) fn uniformize_unchecked(&self, p: f64) -> f64 {
        let z = &self.breakpoints;
        let n = z.len();
        let nf = n as f64;
        // Number of breakpoints strictly below p; p lies in [Z_k, Z_{k+1}]
        // and coincides with Z_{k+1} only if it is a breakpoint.
        let k = z.partition_point(|&b| b < p);
        if k < n && z[k] == p {
            return (k + 1) as f64 / nf;
        }
        let left = if k == 0 { 0.0 } else { z[k - 1] };
        let right = if k == n { 1.0 } else { z[k] };
        let base = k as f64 / nf;
        let top = (k + 1) as f64 / nf;
        if k == n {
            // Above the largest breakpoint the interpolation would exceed 1.
            return 1.0;
        }
        let u = base + (p - left) / (nf * (right - left));
        u.clamp(base, top)
    }

    pub fn uniformize_all(&self, confidences: &[f64]) -> Result<Vec<f64>> {
        confidences.iter().map(|&p| self.uniformize(p)).collect()
    }
}

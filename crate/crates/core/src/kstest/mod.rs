//! One-sample Kolmogorov-Smirnov test of a uniformized batch against the
//! uniform distribution on `[0, 1]`.

pub mod table;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calibration::{CalibrationModel, check_unit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSource {
    Tabulated,
    #[serde(alias = "approx")]
    Approximate,
    #[default]
    Auto,
}

impl fmt::Display for ThresholdSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ThresholdSource::Tabulated => "tabulated",
            ThresholdSource::Approximate => "approximate",
            ThresholdSource::Auto => "auto",
        })
    }
}

impl FromStr for ThresholdSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tabulated" => Ok(ThresholdSource::Tabulated),
            "approx" | "approximate" => Ok(ThresholdSource::Approximate),
            "auto" => Ok(ThresholdSource::Auto),
            other => Err(Error::InvalidParameter(format!(
                "unknown threshold source {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub batch_size: usize,
    pub threshold_source: ThresholdSource,
}

impl TestConfig {
    pub fn new(alpha: f64, batch_size: usize, threshold_source: ThresholdSource) -> Result<Self> {
        check_alpha(alpha)?;
        if batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        Ok(Self {
            alpha,
            batch_size,
            threshold_source,
        })
    }
}

/// Result of testing one batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub positive: bool,
    pub m: usize,
    pub alpha: f64,
    /// Source actually used (never `auto`).
    pub source: ThresholdSource,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha {alpha} must be in (0, 1)")))
    }
}

/// Largest deviation between the batch's empirical cdf and the identity.
pub fn ks_statistic(uniformized: &[f64]) -> Result<f64> {
    if uniformized.is_empty() {
        return Err(Error::InvalidParameter("empty batch".into()));
    }
    for &u in uniformized {
        check_unit(u, "uniformized value")?;
    }
    let mut sorted = uniformized.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(ks_statistic_sorted(&sorted))
}

fn ks_statistic_sorted(sorted: &[f64]) -> f64 {
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let above = z - i as f64 / m;
            let below = (i + 1) as f64 / m - z;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Closed-form approximation `sqrt(-0.5 ln(α/2) / m)`.
pub fn approximate_threshold(alpha: f64, m: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if m == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    Ok((-0.5 * (alpha / 2.0).ln() / m as f64).sqrt())
}

/// Resolve `θ(α, m)`, returning the value and the source that produced it.
pub fn resolve_threshold(alpha: f64, m: usize, source: ThresholdSource) -> Result<(f64, ThresholdSource)> {
    check_alpha(alpha)?;
    if m == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    match source {
        ThresholdSource::Tabulated => table::lookup(alpha, m)
            .map(|e| (e.theta, ThresholdSource::Tabulated))
            .ok_or(Error::NotTabulated { alpha, m }),
        ThresholdSource::Approximate => {
            Ok((approximate_threshold(alpha, m)?, ThresholdSource::Approximate))
        }
        ThresholdSource::Auto => match table::lookup(alpha, m) {
            Some(e) => Ok((e.theta, ThresholdSource::Tabulated)),
            None => Ok((approximate_threshold(alpha, m)?, ThresholdSource::Approximate)),
        },
    }
}

pub fn threshold(alpha: f64, m: usize, source: ThresholdSource) -> Result<f64> {
    resolve_threshold(alpha, m, source).map(|(t, _)| t)
}

/// Uniformize a batch through `model` and test it.
pub fn batch_test(model: &CalibrationModel, confidences: &[f64], config: &TestConfig) -> Result<TestOutcome> {
    if confidences.len() != config.batch_size {
        return Err(Error::InvalidParameter(format!(
            "batch has {} scores, expected {}",
            confidences.len(),
            config.batch_size
        )));
    }
    let (threshold, source) = resolve_threshold(config.alpha, config.batch_size, config.threshold_source)?;
    let mut uniformized = model.uniformize_all(confidences)?;
    uniformized.sort_by(f64::total_cmp);
    let statistic = ks_statistic_sorted(&uniformized);
    Ok(TestOutcome {
        statistic,
        threshold,
        positive: statistic > threshold,
        m: config.batch_size,
        alpha: config.alpha,
        source,
    })
}

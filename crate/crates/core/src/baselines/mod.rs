//! Comparison tests: batch-mean tests with Gaussian (`z`) or resampled
//! (`mean`) thresholds, their log-confidence and two-sided variants, and a
//! chi-squared test on predicted-label frequencies.

mod chi2;
mod mean;
pub mod special;

use serde::{Deserialize, Serialize};

pub use chi2::LabelFrequencyModel;
pub use mean::{
    BootstrapKey, DEFAULT_RESAMPLES, LOG_FLOOR, MeanMethod, MeanTestModel, MeanVariant, Sides,
    Thresholds, batch_mean, bootstrap_mean_thresholds, log_transform,
};
pub use special::{chi2_sf, gamma_q, normal_quantile};

/// Decision of a baseline test on one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub test: String,
    pub statistic: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    pub positive: bool,
    pub m: usize,
    pub alpha: f64,
}

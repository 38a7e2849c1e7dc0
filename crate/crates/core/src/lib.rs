//! Out-of-specs detection for deployed classifiers from prediction
//! confidences alone.
//!
//! The pipeline is: calibrate a within-specs reference from validation
//! confidences ([`calibration`]), uniformize each incoming batch through it
//! and run a one-sample Kolmogorov-Smirnov test against the uniform
//! distribution ([`kstest`]), and on alarm pick a small subset of the batch
//! that is enriched in unexpected samples ([`filtering`]). [`baselines`]
//! holds the mean- and label-based comparison tests, and [`harness`] runs
//! the false/true positive rate and filtering evaluations.

// `!(x > a)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod calibration;
pub mod error;
pub mod filtering;
pub mod harness;
pub mod ingest;
pub mod kstest;
pub mod model_file;
pub mod rng;

pub use calibration::{
    CalibrationModel, JitterParams, ModelMeta, QuantileSketch, ScoreSample, dedupe_jitter,
};
pub use error::{Error, Result};
pub use kstest::{TestConfig, TestOutcome, ThresholdSource, batch_test, ks_statistic, threshold};

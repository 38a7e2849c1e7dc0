//! Evaluation protocols on synthetic generators and file-backed score pools.
//!
//! * false positive rate: alarm rate on within-specs batches;
//! * detection rate: alarm rate on batches mixing a reference and an
//!   alternative source with exactly `round(ρ·m)` alternative samples;
//! * filtering: purity of the subset picked from alarmed mixture batches.
//!
//! Trials run in parallel; each draws from its own seeded stream and results
//! are reduced in trial order, so reports depend only on the seeds.

pub mod config;
mod detector;
mod eval;
mod report;
mod source;

pub use config::{EvalConfig, SourceConfig};
pub use detector::{Detector, DetectorOptions, TestKind};
pub use eval::{
    EvalRow, EvalSettings, FilterMethod, calibration_split, evaluate_filtering, evaluate_fpr,
    evaluate_tpr,
};
pub use report::{CSV_HEADER, EvalReport, LONG_CSV_HEADER};
pub use source::{
    LabelSampler, LabelSpec, MixtureSpec, ScoreSource, TaggedSample, sample_batch,
    sample_mixture_batch,
};

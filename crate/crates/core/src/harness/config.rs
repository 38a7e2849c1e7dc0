//! Declarative evaluation runs.
//!
//! A run is a TOML document:
//!
//! ```toml
//! seed = 7                    # root seed for every random draw
//! trials = 1000               # batches per cell (default 10000)
//! calibration_size = 50000    # synthetic calibration draws
//! calibration_fraction = 0.5  # share of a file pool held out for calibration
//! bootstrap_resamples = 100000
//! threshold_source = "auto"   # tabulated | approximate | auto
//! jitter_eps = 1e-9
//!
//! [sources.ref]
//! kind = "beta"               # beta | file
//! a = 5.0
//! b = 1.0
//! labels = { kind = "dirichlet", k = 1000, concentration = 5.0 }
//!
//! [sources.awa]
//! kind = "file"
//! path = "scores/awa2.csv"    # relative to the config file
//!
//! [[fpr]]
//! source = "ref"
//! tests = ["ks-conf", "mean", "z"]
//! alpha = [0.01, 0.1]
//! m = [10, 100]
//!
//! [[tpr]]
//! reference = "ref"
//! alternative = "awa"
//! tests = ["ks-conf", "sym-mean"]
//! rho = [0.0, 0.25, 0.5, 1.0]
//! alpha = [0.01]
//! m = [1000]
//!
//! [[filtering]]
//! reference = "ref"
//! alternative = "awa"
//! rho = [0.1, 0.3, 0.5]
//! m = 1000
//! w = 10
//! alpha = 0.01
//! positives = 1000
//! ```
//!
//! Label specs are `uniform { k }`, `dirichlet { k, concentration, seed }`
//! or `zipf { k, exponent }`. Sections may override `trials`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::detector::{DetectorOptions, TestKind};
use super::eval::{EvalSettings, evaluate_filtering, evaluate_fpr, evaluate_tpr};
use super::report::EvalReport;
use super::source::{LabelSpec, ScoreSource};
use crate::calibration::{DEFAULT_JITTER_EPS, JitterParams};
use crate::error::{Error, Result};
use crate::ingest::{self, Format};
use crate::kstest::ThresholdSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceConfig {
    Beta {
        a: f64,
        b: f64,
        #[serde(default)]
        labels: Option<LabelSpec>,
    },
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FprSection {
    pub source: String,
    pub tests: Vec<String>,
    pub alpha: Vec<f64>,
    pub m: Vec<usize>,
    #[serde(default)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TprSection {
    pub reference: String,
    pub alternative: String,
    pub tests: Vec<String>,
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub m: Vec<usize>,
    #[serde(default)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilteringSection {
    pub reference: String,
    pub alternative: String,
    pub rho: Vec<f64>,
    pub m: usize,
    pub w: usize,
    #[serde(default = "default_filter_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub positives: Option<usize>,
    #[serde(default)]
    pub max_attempts: Option<usize>,
}

fn default_filter_alpha() -> f64 {
    0.01
}

fn default_trials() -> usize {
    10_000
}

fn default_calibration_size() -> usize {
    50_000
}

fn default_calibration_fraction() -> f64 {
    0.5
}

fn default_resamples() -> usize {
    crate::baselines::DEFAULT_RESAMPLES
}

fn default_jitter_eps() -> f64 {
    DEFAULT_JITTER_EPS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_calibration_size")]
    pub calibration_size: usize,
    #[serde(default = "default_calibration_fraction")]
    pub calibration_fraction: f64,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub threshold_source: ThresholdSource,
    #[serde(default = "default_jitter_eps")]
    pub jitter_eps: f64,
    pub sources: BTreeMap<String, SourceConfig>,
    #[serde(default)]
    pub fpr: Vec<FprSection>,
    #[serde(default)]
    pub tpr: Vec<TprSection>,
    #[serde(default)]
    pub filtering: Vec<FilteringSection>,
}

impl EvalConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn settings(&self) -> EvalSettings {
        EvalSettings {
            seed: self.seed,
            calibration_size: self.calibration_size,
            calibration_fraction: self.calibration_fraction,
            detector: DetectorOptions {
                jitter: JitterParams {
                    epsilon: self.jitter_eps,
                    seed: self.seed,
                },
                threshold_source: self.threshold_source,
                bootstrap_resamples: self.bootstrap_resamples,
                bootstrap_seed: self.seed,
                label_count: None,
            },
        }
    }

    /// Resolve every named source; file paths are relative to `base_dir`.
    pub fn load_sources(&self, base_dir: &Path) -> Result<BTreeMap<String, ScoreSource>> {
        self.sources
            .iter()
            .map(|(name, cfg)| {
                let source = match cfg {
                    SourceConfig::Beta { a, b, labels } => {
                        ScoreSource::beta_with_labels(*a, *b, labels.as_ref())?
                    }
                    SourceConfig::File { path } => {
                        let full = base_dir.join(path);
                        let format = Format::from_path(&full.to_string_lossy());
                        let file = File::open(&full).map_err(|e| {
                            Error::Config(format!("source {name:?}: cannot open {}: {e}", full.display()))
                        })?;
                        ScoreSource::pool(ingest::read_all(BufReader::new(file), format)?)?
                    }
                };
                Ok((name.clone(), source))
            })
            .collect()
    }

    pub fn run(&self, base_dir: &Path) -> Result<EvalReport> {
        let sources = self.load_sources(base_dir)?;
        let get = |name: &str| {
            sources
                .get(name)
                .ok_or_else(|| Error::Config(format!("unknown source {name:?}")))
        };
        let parse_tests = |names: &[String]| names.iter().map(|t| t.parse::<TestKind>()).collect::<Result<Vec<_>>>();
        let settings = self.settings();
        let mut rows = Vec::new();

        for section in &self.fpr {
            let source = get(&section.source)?;
            let trials = section.trials.unwrap_or(self.trials);
            for kind in parse_tests(&section.tests)? {
                for &alpha in &section.alpha {
                    for &m in &section.m {
                        rows.push(evaluate_fpr(kind, source, m, alpha, trials, &settings)?);
                    }
                }
            }
        }
        for section in &self.tpr {
            let reference = get(&section.reference)?;
            let alternative = get(&section.alternative)?;
            let trials = section.trials.unwrap_or(self.trials);
            for kind in parse_tests(&section.tests)? {
                for &alpha in &section.alpha {
                    for &m in &section.m {
                        rows.extend(evaluate_tpr(
                            kind,
                            reference,
                            alternative,
                            &section.rho,
                            m,
                            alpha,
                            trials,
                            &settings,
                        )?);
                    }
                }
            }
        }
        for section in &self.filtering {
            let positives = section.positives.unwrap_or(self.trials);
            rows.extend(evaluate_filtering(
                get(&section.reference)?,
                get(&section.alternative)?,
                &section.rho,
                section.m,
                section.w,
                section.alpha,
                positives,
                section.max_attempts.unwrap_or(positives.saturating_mul(50)),
                &settings,
            )?);
        }
        Ok(EvalReport::new(rows))
    }
}

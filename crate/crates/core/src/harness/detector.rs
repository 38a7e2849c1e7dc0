use std::fmt;
use std::str::FromStr;

use crate::baselines::{LabelFrequencyModel, MeanMethod, MeanTestModel, MeanVariant, Sides};
use crate::calibration::{CalibrationModel, JitterParams, ScoreSample};
use crate::error::{Error, Result};
use crate::kstest::{TestConfig, ThresholdSource, batch_test};

/// Every test the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestKind {
    KsConf,
    Mean { variant: MeanVariant, log_space: bool },
    Chi2,
}

impl TestKind {
    pub const ALL_NAMES: [&'static str; 10] = [
        "ks-conf",
        "z",
        "log-z",
        "mean",
        "log-mean",
        "sym-z",
        "sym-log-z",
        "sym-mean",
        "sym-log-mean",
        "chi2",
    ];
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestKind::KsConf => f.write_str("ks-conf"),
            TestKind::Mean { variant, log_space } => f.write_str(&variant.name(*log_space)),
            TestKind::Chi2 => f.write_str("chi2"),
        }
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ks-conf" | "ksconf" => return Ok(TestKind::KsConf),
            "chi2" => return Ok(TestKind::Chi2),
            _ => {}
        }
        let (sides, rest) = match s.strip_prefix("sym-") {
            Some(rest) => (Sides::Symmetric, rest),
            None => (Sides::OneSided, s),
        };
        let (log_space, rest) = match rest.strip_prefix("log-") {
            Some(rest) => (true, rest),
            None => (false, rest),
        };
        let method = match rest {
            "z" => MeanMethod::Z,
            "mean" => MeanMethod::Mean,
            _ => return Err(Error::InvalidParameter(format!("unknown test {s:?}"))),
        };
        Ok(TestKind::Mean {
            variant: MeanVariant { method, sides },
            log_space,
        })
    }
}

/// Calibration settings shared by all detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorOptions {
    pub jitter: JitterParams,
    pub threshold_source: ThresholdSource,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    /// Label count for the chi-squared test; inferred from data if absent.
    pub label_count: Option<usize>,
}

impl Default for DetectorOptions {
    fn default() -> Self {
        Self {
            jitter: JitterParams::default(),
            threshold_source: ThresholdSource::Auto,
            bootstrap_resamples: crate::baselines::DEFAULT_RESAMPLES,
            bootstrap_seed: 0,
            label_count: None,
        }
    }
}

#[derive(Debug, Clone)]
enum Inner {
    Ks(CalibrationModel, TestConfig),
    Mean(MeanTestModel, MeanVariant),
    Chi2(LabelFrequencyModel),
}

/// A test calibrated for one `(alpha, m)`.
#[derive(Debug, Clone)]
pub struct Detector {
    kind: TestKind,
    alpha: f64,
    m: usize,
    inner: Inner,
}

impl Detector {
    pub fn calibrate(
        kind: TestKind,
        calibration: &[ScoreSample],
        alpha: f64,
        m: usize,
        options: &DetectorOptions,
    ) -> Result<Self> {
        let confidences: Vec<f64> = calibration.iter().map(|s| s.confidence).collect();
        let inner = match kind {
            TestKind::KsConf => Inner::Ks(
                CalibrationModel::build(&confidences, options.jitter)?,
                TestConfig::new(alpha, m, options.threshold_source)?,
            ),
            TestKind::Mean { variant, log_space } => {
                let mut model = MeanTestModel::calibrate(&confidences, log_space)?;
                if variant.method == MeanMethod::Mean {
                    model.calibrate_bootstrap(
                        &confidences,
                        m,
                        alpha,
                        variant.sides == Sides::Symmetric,
                        options.bootstrap_resamples,
                        options.bootstrap_seed,
                    )?;
                }
                // Surface degenerate models at calibration time.
                model.thresholds(alpha, m, variant)?;
                Inner::Mean(model, variant)
            }
            TestKind::Chi2 => {
                let labels = calibration
                    .iter()
                    .map(|s| {
                        s.label.ok_or_else(|| {
                            Error::InvalidParameter(format!("sample {:?} has no label", s.id))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let k = match options.label_count {
                    Some(k) => k,
                    None => labels.iter().max().map_or(0, |l| l + 1),
                };
                Inner::Chi2(LabelFrequencyModel::calibrate(&labels, k)?)
            }
        };
        Ok(Self {
            kind,
            alpha,
            m,
            inner,
        })
    }

    pub fn kind(&self) -> TestKind {
        self.kind
    }

    pub fn calibration_model(&self) -> Option<&CalibrationModel> {
        match &self.inner {
            Inner::Ks(model, _) => Some(model),
            _ => None,
        }
    }

    /// Whether the batch raises an alarm.
    pub fn decide(&self, batch: &[ScoreSample]) -> Result<bool> {
        if batch.len() != self.m {
            return Err(Error::InvalidParameter(format!(
                "batch has {} samples, expected {}",
                batch.len(),
                self.m
            )));
        }
        match &self.inner {
            Inner::Ks(model, config) => {
                let conf: Vec<f64> = batch.iter().map(|s| s.confidence).collect();
                Ok(batch_test(model, &conf, config)?.positive)
            }
            Inner::Mean(model, variant) => {
                let conf: Vec<f64> = batch.iter().map(|s| s.confidence).collect();
                Ok(model.decide(&conf, self.alpha, self.m, *variant)?.positive)
            }
            Inner::Chi2(model) => {
                let labels = batch
                    .iter()
                    .map(|s| {
                        s.label.ok_or_else(|| {
                            Error::InvalidParameter(format!("sample {:?} has no label", s.id))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(model.chi2_test(&labels, self.alpha)?.positive)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for name in TestKind::ALL_NAMES {
            let kind: TestKind = name.parse().unwrap();
            assert_eq!(kind.to_string(), name);
        }
        assert!("sym-chi2".parse::<TestKind>().is_err());
        assert!("log-ks".parse::<TestKind>().is_err());
    }
}

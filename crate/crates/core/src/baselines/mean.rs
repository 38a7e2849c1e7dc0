use std::collections::BTreeMap;
use std::fmt;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BaselineOutcome;
use super::special::normal_quantile;
use crate::calibration::check_unit;
use crate::error::{Error, Result};
use crate::kstest::check_alpha;
use crate::rng;

/// Confidences are floored here before taking logs.
pub const LOG_FLOOR: f64 = 1e-12;

pub const DEFAULT_RESAMPLES: usize = 100_000;

pub fn log_transform(confidence: f64) -> f64 {
    confidence.max(LOG_FLOOR).ln()
}

/// Mean in input order.
pub fn batch_mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanMethod {
    /// Gaussian approximation of the batch mean.
    Z,
    /// Resampled batch means.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sides {
    OneSided,
    Symmetric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeanVariant {
    pub method: MeanMethod,
    pub sides: Sides,
}

impl MeanVariant {
    pub fn name(&self, log_space: bool) -> String {
        let mut s = String::new();
        if self.sides == Sides::Symmetric {
            s.push_str("sym-");
        }
        if log_space {
            s.push_str("log-");
        }
        s.push_str(match self.method {
            MeanMethod::Z => "z",
            MeanMethod::Mean => "mean",
        });
        s
    }
}

/// Alarm region boundaries for a batch mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Thresholds {
    /// Alarm when the mean falls below.
    Lower(f64),
    /// Alarm when the mean leaves `[lower, upper]`.
    Band { lower: f64, upper: f64 },
}

impl Thresholds {
    pub fn alarms(&self, mean: f64) -> bool {
        match *self {
            Thresholds::Lower(t) => mean < t,
            Thresholds::Band { lower, upper } => mean < lower || mean > upper,
        }
    }

    fn bounds(&self) -> (f64, Option<f64>) {
        match *self {
            Thresholds::Lower(t) => (t, None),
            Thresholds::Band { lower, upper } => (lower, Some(upper)),
        }
    }
}

impl fmt::Display for Thresholds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Thresholds::Lower(t) => write!(f, "<{t}"),
            Thresholds::Band { lower, upper } => write!(f, "[{lower}, {upper}]"),
        }
    }
}

/// Bootstrap table key. `alpha` is keyed by its bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BootstrapKey {
    pub alpha_bits: u64,
    pub m: usize,
    pub symmetric: bool,
}

impl BootstrapKey {
    pub fn new(alpha: f64, m: usize, symmetric: bool) -> Self {
        Self {
            alpha_bits: alpha.to_bits(),
            m,
            symmetric,
        }
    }

    pub fn alpha(&self) -> f64 {
        f64::from_bits(self.alpha_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanTestModel {
    pub mu: f64,
    pub sigma2: f64,
    pub log_space: bool,
    pub bootstrap: BTreeMap<BootstrapKey, Thresholds>,
}

impl MeanTestModel {
    /// Validation mean and (unbiased) variance, of logs if `log_space`.
    pub fn calibrate(val_scores: &[f64], log_space: bool) -> Result<Self> {
        let values = prepare(val_scores, log_space)?;
        if values.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: values.len(),
            });
        }
        let n = values.len() as f64;
        let mu = values.iter().sum::<f64>() / n;
        let sigma2 = values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            mu,
            sigma2,
            log_space,
            bootstrap: BTreeMap::new(),
        })
    }

    pub fn transform(&self, confidence: f64) -> f64 {
        if self.log_space {
            log_transform(confidence)
        } else {
            confidence
        }
    }

    /// Gaussian thresholds for the mean of `m` within-specs scores.
    pub fn z_threshold(&self, alpha: f64, m: usize, symmetric: bool) -> Result<Thresholds> {
        check_alpha(alpha)?;
        check_batch(m)?;
        if !(self.sigma2 > 0.0) {
            return Err(Error::DegenerateModel(format!(
                "validation variance {} leaves the z-test undefined",
                self.sigma2
            )));
        }
        let scale = (self.sigma2 / m as f64).sqrt();
        if symmetric {
            Ok(Thresholds::Band {
                lower: self.mu + normal_quantile(alpha / 2.0)? * scale,
                upper: self.mu + normal_quantile(1.0 - alpha / 2.0)? * scale,
            })
        } else {
            Ok(Thresholds::Lower(self.mu + normal_quantile(alpha)? * scale))
        }
    }

    /// Resample thresholds from `val_scores` and store them under `(alpha, m, symmetric)`.
    pub fn calibrate_bootstrap(
        &mut self,
        val_scores: &[f64],
        m: usize,
        alpha: f64,
        symmetric: bool,
        resamples: usize,
        seed: u64,
    ) -> Result<Thresholds> {
        let t = bootstrap_mean_thresholds(val_scores, m, alpha, symmetric, resamples, seed, self.log_space)?;
        self.bootstrap.insert(BootstrapKey::new(alpha, m, symmetric), t);
        Ok(t)
    }

    pub fn bootstrap_thresholds(&self, alpha: f64, m: usize, symmetric: bool) -> Result<Thresholds> {
        self.bootstrap
            .get(&BootstrapKey::new(alpha, m, symmetric))
            .copied()
            .ok_or_else(|| {
                Error::NeedsCalibration(format!(
                    "no resampled thresholds for alpha={alpha}, m={m}, symmetric={symmetric}; \
                     rerun calibration with validation data"
                ))
            })
    }

    pub fn thresholds(&self, alpha: f64, m: usize, variant: MeanVariant) -> Result<Thresholds> {
        let symmetric = variant.sides == Sides::Symmetric;
        match variant.method {
            MeanMethod::Z => self.z_threshold(alpha, m, symmetric),
            MeanMethod::Mean => self.bootstrap_thresholds(alpha, m, symmetric),
        }
    }

    /// Test one batch of raw confidences.
    pub fn decide(&self, batch: &[f64], alpha: f64, m: usize, variant: MeanVariant) -> Result<BaselineOutcome> {
        if batch.len() != m {
            return Err(Error::InvalidParameter(format!(
                "batch has {} scores, expected {m}",
                batch.len()
            )));
        }
        let thresholds = self.thresholds(alpha, m, variant)?;
        let values = prepare(batch, self.log_space)?;
        let mean = batch_mean(&values);
        let (lower, upper) = thresholds.bounds();
        Ok(BaselineOutcome {
            test: variant.name(self.log_space),
            statistic: mean,
            lower: Some(lower),
            upper,
            p_value: None,
            positive: thresholds.alarms(mean),
            m,
            alpha,
        })
    }
}

fn check_batch(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::InvalidParameter("batch size must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn prepare(scores: &[f64], log_space: bool) -> Result<Vec<f64>> {
    scores
        .iter()
        .map(|&s| {
            check_unit(s, "confidence")?;
            Ok(if log_space { log_transform(s) } else { s })
        })
        .collect()
}

/// Empirical thresholds from `resamples` batch means of size `m`, drawn with
/// replacement from `val_scores`.
///
/// Quantiles use the lower order statistic: the one-sided threshold is the
/// `⌈B·α⌉`-th smallest mean, so at most a fraction `α` of the resampled
/// means lie strictly below it. The two-sided band splits `α` evenly.
pub fn bootstrap_mean_thresholds(
    val_scores: &[f64],
    m: usize,
    alpha: f64,
    symmetric: bool,
    resamples: usize,
    seed: u64,
    log_space: bool,
) -> Result<Thresholds> {
    check_alpha(alpha)?;
    check_batch(m)?;
    if (resamples as f64) * alpha < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "{resamples} resamples cannot resolve the {alpha} quantile"
        )));
    }
    let values = prepare(val_scores, log_space)?;
    if values.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(resampled_thresholds(&values, m, alpha, symmetric, resamples, seed))
}

/// Resampling core over already-transformed values.
fn resampled_thresholds(
    values: &[f64],
    m: usize,
    alpha: f64,
    symmetric: bool,
    resamples: usize,
    seed: u64,
) -> Thresholds {
    let mut means: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b as u64);
            let mut batch = Vec::with_capacity(m);
            for _ in 0..m {
                batch.push(values[r.gen_range(0..values.len())]);
            }
            batch_mean(&batch)
        })
        .collect();
    means.sort_by(f64::total_cmp);

    let rank = |level: f64| -> usize {
        // 1-based order statistic ⌈B·level⌉, guarded against round-off.
        let r = (resamples as f64 * level - 1e-9).ceil() as usize;
        r.clamp(1, resamples)
    };
    if symmetric {
        let k = rank(alpha / 2.0);
        Thresholds::Band {
            lower: means[k - 1],
            upper: means[resamples - k],
        }
    } else {
        Thresholds::Lower(means[rank(alpha) - 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Beta, Distribution};

    fn beta(a: f64, b: f64, n: usize, seed: u64) -> Vec<f64> {
        let d = Beta::new(a, b).unwrap();
        let mut r = rng::seeded(seed);
        (0..n).map(|_| d.sample(&mut r)).collect()
    }

    fn model(mu: f64, sigma: f64) -> MeanTestModel {
        MeanTestModel {
            mu,
            sigma2: sigma * sigma,
            log_space: false,
            bootstrap: BTreeMap::new(),
        }
    }

    const Z: MeanVariant = MeanVariant {
        method: MeanMethod::Z,
        sides: Sides::OneSided,
    };
    const SYM_Z: MeanVariant = MeanVariant {
        method: MeanMethod::Z,
        sides: Sides::Symmetric,
    };
    const MEAN: MeanVariant = MeanVariant {
        method: MeanMethod::Mean,
        sides: Sides::OneSided,
    };
    const SYM_MEAN: MeanVariant = MeanVariant {
        method: MeanMethod::Mean,
        sides: Sides::Symmetric,
    };

    #[test]
    fn z_threshold_examples() {
        let m = model(0.8, 0.1);
        assert_eq!(m.z_threshold(0.5, 100, false).unwrap(), Thresholds::Lower(0.8));
        let Thresholds::Lower(t) = m.z_threshold(0.05, 100, false).unwrap() else {
            panic!()
        };
        assert!((t - (0.8 - 1.644_853_626_951_472_2 * 0.01)).abs() < 1e-12);
        assert!((t - 0.78355).abs() < 1e-5);
        let Thresholds::Band { lower, upper } = m.z_threshold(0.05, 100, true).unwrap() else {
            panic!()
        };
        assert!((lower - (0.8 - 1.959_963_984_540_054 * 0.01)).abs() < 1e-12);
        assert!((upper - (0.8 + 1.959_963_984_540_054 * 0.01)).abs() < 1e-12);
    }

    #[test]
    fn z_degenerate() {
        let m = model(0.8, 0.0);
        assert!(matches!(
            m.z_threshold(0.05, 10, false),
            Err(Error::DegenerateModel(_))
        ));
    }

    #[test]
    fn constant_scores_never_alarm() {
        let val = vec![0.7; 50];
        let t = bootstrap_mean_thresholds(&val, 100, 0.01, false, 1000, 3, false).unwrap();
        assert_eq!(t, Thresholds::Lower(batch_mean(&[0.7; 100])));
        let mut model = MeanTestModel::calibrate(&val, false).unwrap();
        model.calibrate_bootstrap(&val, 100, 0.01, false, 1000, 3).unwrap();
        let out = model.decide(&[0.7; 100], 0.01, 100, MEAN).unwrap();
        assert!(!out.positive);
    }

    #[test]
    fn bootstrap_rejects_unresolvable_alpha() {
        let val = beta(5.0, 1.0, 100, 1);
        assert!(matches!(
            bootstrap_mean_thresholds(&val, 10, 0.001, false, 999, 0, false),
            Err(Error::InvalidParameter(_))
        ));
        assert!(bootstrap_mean_thresholds(&val, 10, 0.001, false, 1000, 0, false).is_ok());
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let val = beta(5.0, 1.0, 1000, 1);
        let a = bootstrap_mean_thresholds(&val, 20, 0.05, true, 5000, 9, false).unwrap();
        let b = bootstrap_mean_thresholds(&val, 20, 0.05, true, 5000, 9, false).unwrap();
        assert_eq!(a, b);
        let Thresholds::Band { lower, upper } = a else { panic!() };
        assert!(lower < upper);
    }

    #[test]
    fn log_space_equals_transformed_input() {
        let mut val = beta(5.0, 1.0, 2000, 2);
        val.push(0.0);
        let logged: Vec<f64> = val.iter().map(|&v| log_transform(v)).collect();
        for symmetric in [false, true] {
            let a = bootstrap_mean_thresholds(&val, 30, 0.05, symmetric, 2000, 4, true).unwrap();
            assert_eq!(a, resampled_thresholds(&logged, 30, 0.05, symmetric, 2000, 4));
        }

        let lm = MeanTestModel::calibrate(&val, true).unwrap();
        let n = logged.len() as f64;
        let mu = logged.iter().sum::<f64>() / n;
        let s2 = logged.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0);
        assert_eq!((lm.mu, lm.sigma2), (mu, s2));
    }

    #[test]
    fn needs_calibration() {
        let m = model(0.8, 0.1);
        let err = m.decide(&[0.5; 10], 0.01, 10, MEAN).unwrap_err();
        assert!(matches!(err, Error::NeedsCalibration(_)));
    }

    #[test]
    fn higher_confidence_shift() {
        let val = beta(5.0, 1.0, 20_000, 5);
        let mut model = MeanTestModel::calibrate(&val, false).unwrap();
        model.calibrate_bootstrap(&val, 100, 0.01, false, 20_000, 1).unwrap();
        model.calibrate_bootstrap(&val, 100, 0.01, true, 20_000, 1).unwrap();
        let shifted = beta(20.0, 1.0, 100, 6);
        for v in [Z, MEAN] {
            assert!(!model.decide(&shifted, 0.01, 100, v).unwrap().positive);
        }
        for v in [SYM_Z, SYM_MEAN] {
            assert!(model.decide(&shifted, 0.01, 100, v).unwrap().positive);
        }
        let low = beta(1.0, 5.0, 100, 7);
        for v in [Z, MEAN, SYM_Z, SYM_MEAN] {
            assert!(model.decide(&low, 0.01, 100, v).unwrap().positive);
        }
        let above = vec![0.99; 100];
        assert!(!model.decide(&above, 0.01, 100, Z).unwrap().positive);
    }

    #[test]
    fn variant_names() {
        assert_eq!(Z.name(false), "z");
        assert_eq!(SYM_MEAN.name(true), "sym-log-mean");
    }
}

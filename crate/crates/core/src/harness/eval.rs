use rand::RngCore;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::detector::{Detector, DetectorOptions, TestKind};
use super::source::{MixtureSpec, ScoreSource, sample_batch, sample_mixture_batch};
use crate::calibration::ScoreSample;
use crate::error::{Error, Result};
use crate::filtering::{filter_suspicious, lowest_confidence_baseline};
use crate::rng::{self, derive_seed};

/// Run-wide evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub seed: u64,
    /// Samples drawn for calibration from synthetic sources.
    pub calibration_size: usize,
    /// Share of a file pool reserved for calibration.
    pub calibration_fraction: f64,
    pub detector: DetectorOptions,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            seed: 0,
            calibration_size: 50_000,
            calibration_fraction: 0.5,
            detector: DetectorOptions::default(),
        }
    }
}

/// One `(test, alpha, m, rho)` cell of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub test: String,
    pub alpha: f64,
    pub m: usize,
    pub rho: f64,
    pub rate: f64,
    pub stderr: f64,
    pub trials: usize,
}

impl EvalRow {
    fn from_counts(test: String, alpha: f64, m: usize, rho: f64, positives: usize, trials: usize) -> Self {
        let rate = if trials == 0 { 0.0 } else { positives as f64 / trials as f64 };
        let stderr = if trials == 0 {
            0.0
        } else {
            (rate * (1.0 - rate) / trials as f64).sqrt()
        };
        Self {
            test,
            alpha,
            m,
            rho,
            rate,
            stderr,
            trials,
        }
    }
}

/// Calibration samples plus the source that test batches come from.
/// File pools are split so the two never share a sample.
pub fn calibration_split(source: &ScoreSource, settings: &EvalSettings) -> Result<(Vec<ScoreSample>, ScoreSource)> {
    let (cal_source, test_source) = source.split(
        settings.calibration_fraction,
        derive_seed(settings.seed, "pool-split"),
    )?;
    let calibration = match &cal_source {
        ScoreSource::Pool { samples } => samples.to_vec(),
        synthetic => synthetic.draw_many(
            settings.calibration_size,
            derive_seed(settings.seed, "calibration"),
            "c",
        ),
    };
    Ok((calibration, test_source))
}

fn detector_options(settings: &EvalSettings, source: &ScoreSource) -> DetectorOptions {
    let mut opts = settings.detector;
    opts.bootstrap_seed = derive_seed(settings.seed, "bootstrap");
    if opts.label_count.is_none() {
        opts.label_count = source.label_count();
    }
    opts
}

fn count_positives<F>(trials: usize, trial: F) -> Result<usize>
where
    F: Fn(u64) -> Result<bool> + Sync + Send,
{
    let outcomes = (0..trials as u64)
        .into_par_iter()
        .map(trial)
        .collect::<Result<Vec<bool>>>()?;
    Ok(outcomes.into_iter().filter(|&p| p).count())
}

/// Fraction of within-specs batches that raise an alarm.
pub fn evaluate_fpr(
    kind: TestKind,
    within: &ScoreSource,
    m: usize,
    alpha: f64,
    trials: usize,
    settings: &EvalSettings,
) -> Result<EvalRow> {
    let (calibration, test_source) = calibration_split(within, settings)?;
    let detector = Detector::calibrate(kind, &calibration, alpha, m, &detector_options(settings, within))?;
    let batch_seed = derive_seed(settings.seed, "fpr-batches");
    let positives = count_positives(trials, |t| {
        let mut r = rng::stream(batch_seed, t);
        detector.decide(&sample_batch(&test_source, m, &mut r)?)
    })?;
    Ok(EvalRow::from_counts(kind.to_string(), alpha, m, 0.0, positives, trials))
}

/// Alarm rate on mixture batches, one row per mixture proportion.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_tpr(
    kind: TestKind,
    reference: &ScoreSource,
    alternative: &ScoreSource,
    rhos: &[f64],
    m: usize,
    alpha: f64,
    trials: usize,
    settings: &EvalSettings,
) -> Result<Vec<EvalRow>> {
    let (calibration, test_reference) = calibration_split(reference, settings)?;
    let detector = Detector::calibrate(kind, &calibration, alpha, m, &detector_options(settings, reference))?;
    rhos.iter()
        .map(|&rho| {
            let mixture = MixtureSpec::new(test_reference.clone(), alternative.clone(), rho)?;
            let batch_seed = derive_seed(settings.seed, &format!("tpr-batches/{rho}"));
            let positives = count_positives(trials, |t| {
                let mut r = rng::stream(batch_seed, t);
                let batch: Vec<ScoreSample> = sample_mixture_batch(&mixture, m, &mut r)?
                    .into_iter()
                    .map(|s| s.sample)
                    .collect();
                detector.decide(&batch)
            })?;
            Ok(EvalRow::from_counts(kind.to_string(), alpha, m, rho, positives, trials))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMethod {
    KsConfFilter,
    LowestConfidence,
    Random,
}

impl FilterMethod {
    pub const ALL: [FilterMethod; 3] = [
        FilterMethod::KsConfFilter,
        FilterMethod::LowestConfidence,
        FilterMethod::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FilterMethod::KsConfFilter => "filter:ks-conf",
            FilterMethod::LowestConfidence => "filter:lowest-confidence",
            FilterMethod::Random => "filter:random",
        }
    }
}

/// Subset purity on alarmed mixture batches.
///
/// For every mixture proportion, batches are drawn until `positives` of them
/// alarm under KS(conf) (or `max_attempts` is reached). On each alarmed batch
/// every [`FilterMethod`] picks `w` samples; the row's `rate` is the mean
/// fraction of alternative samples in those subsets, `stderr` its standard
/// error, and `trials` the number of alarmed batches used.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_filtering(
    reference: &ScoreSource,
    alternative: &ScoreSource,
    rhos: &[f64],
    m: usize,
    w: usize,
    alpha: f64,
    positives: usize,
    max_attempts: usize,
    settings: &EvalSettings,
) -> Result<Vec<EvalRow>> {
    if w == 0 || w > m {
        return Err(Error::InvalidParameter(format!(
            "subset size {w} must be between 1 and the batch size {m}"
        )));
    }
    let (calibration, test_reference) = calibration_split(reference, settings)?;
    let detector = Detector::calibrate(
        TestKind::KsConf,
        &calibration,
        alpha,
        m,
        &detector_options(settings, reference),
    )?;
    let model = detector.calibration_model().expect("ks-conf detector holds a model");

    let mut rows = Vec::new();
    for &rho in rhos {
        let mixture = MixtureSpec::new(test_reference.clone(), alternative.clone(), rho)?;
        let batch_seed = derive_seed(settings.seed, &format!("filter-batches/{rho}"));
        let trial = |t: u64| -> Result<Option<[f64; 3]>> {
            let mut r = rng::stream(batch_seed, t);
            let tagged = sample_mixture_batch(&mixture, m, &mut r)?;
            let batch: Vec<ScoreSample> = tagged.iter().map(|s| s.sample.clone()).collect();
            if !detector.decide(&batch)? {
                return Ok(None);
            }
            let purity = |ids: &[usize]| ids.iter().filter(|&&i| tagged[i].alternative).count() as f64 / w as f64;
            let position = |id: &str| id[1..].parse::<usize>().expect("batch ids are b<index>");

            let filtered = filter_suspicious(model, &batch, w, r.next_u64())?;
            let ks: Vec<usize> = filtered.selected.iter().map(|s| position(&s.id)).collect();
            let low: Vec<usize> = lowest_confidence_baseline(&batch, w)?
                .iter()
                .map(|id| position(id))
                .collect();
            let random: Vec<usize> = index::sample(&mut r, m, w).into_vec();
            Ok(Some([purity(&ks), purity(&low), purity(&random)]))
        };

        let mut found: Vec<[f64; 3]> = Vec::with_capacity(positives);
        let chunk = 512u64;
        let mut start = 0u64;
        while found.len() < positives && (start as usize) < max_attempts {
            let end = (start + chunk).min(max_attempts as u64);
            let results = (start..end)
                .into_par_iter()
                .map(trial)
                .collect::<Result<Vec<_>>>()?;
            found.extend(results.into_iter().flatten());
            start = end;
        }
        found.truncate(positives);

        for (j, method) in FilterMethod::ALL.iter().enumerate() {
            let values: Vec<f64> = found.iter().map(|f| f[j]).collect();
            let (mean, stderr) = mean_and_stderr(&values);
            rows.push(EvalRow {
                test: method.name().to_string(),
                alpha,
                m,
                rho,
                rate: mean,
                stderr,
                trials: values.len(),
            });
        }
    }
    Ok(rows)
}

fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

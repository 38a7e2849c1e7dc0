use std::sync::Arc;

use rand::Rng as _;
use rand::seq::SliceRandom;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::calibration::ScoreSample;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// How predicted labels are generated for synthetic samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LabelSpec {
    Uniform { k: usize },
    /// Frequencies drawn once from a symmetric Dirichlet.
    Dirichlet {
        k: usize,
        concentration: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Frequencies proportional to `1 / (j + 1)^exponent`.
    Zipf { k: usize, exponent: f64 },
}

impl LabelSpec {
    pub fn label_count(&self) -> usize {
        match *self {
            LabelSpec::Uniform { k } | LabelSpec::Dirichlet { k, .. } | LabelSpec::Zipf { k, .. } => k,
        }
    }

    pub fn probabilities(&self) -> Result<Vec<f64>> {
        let k = self.label_count();
        if k == 0 {
            return Err(Error::InvalidParameter("label count must be positive".into()));
        }
        let weights: Vec<f64> = match *self {
            LabelSpec::Uniform { .. } => vec![1.0; k],
            LabelSpec::Dirichlet { concentration, seed, .. } => {
                let g = Gamma::new(concentration, 1.0)
                    .map_err(|e| Error::InvalidParameter(format!("dirichlet concentration: {e}")))?;
                let mut r = rng::seeded(seed);
                (0..k).map(|_| g.sample(&mut r)).collect()
            }
            LabelSpec::Zipf { exponent, .. } => {
                (0..k).map(|j| ((j + 1) as f64).powf(-exponent)).collect()
            }
        };
        let total: f64 = weights.iter().sum();
        Ok(weights.into_iter().map(|w| w / total).collect())
    }
}

#[derive(Debug)]
pub struct LabelSampler {
    cumulative: Vec<f64>,
}

impl LabelSampler {
    fn new(probabilities: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { cumulative }
    }

    fn sample(&self, rng: &mut Rng) -> usize {
        let u = rng.r#gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// A stream of scores: a synthetic Beta generator or a pool read from disk.
#[derive(Debug, Clone)]
pub enum ScoreSource {
    Beta {
        a: f64,
        b: f64,
        dist: Beta<f64>,
        labels: Option<Arc<LabelSampler>>,
        label_count: Option<usize>,
    },
    Pool {
        samples: Arc<Vec<ScoreSample>>,
    },
}

impl ScoreSource {
    pub fn beta(a: f64, b: f64) -> Result<Self> {
        Self::beta_with_labels(a, b, None)
    }

    pub fn beta_with_labels(a: f64, b: f64, labels: Option<&LabelSpec>) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidParameter(format!("beta parameters ({a}, {b}) must be positive")));
        }
        let dist = Beta::new(a, b).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let (labels, label_count) = match labels {
            Some(spec) => (
                Some(Arc::new(LabelSampler::new(&spec.probabilities()?))),
                Some(spec.label_count()),
            ),
            None => (None, None),
        };
        Ok(ScoreSource::Beta {
            a,
            b,
            dist,
            labels,
            label_count,
        })
    }

    pub fn pool(samples: Vec<ScoreSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        Ok(ScoreSource::Pool {
            samples: Arc::new(samples),
        })
    }

    /// Declared label count, if the source carries labels.
    pub fn label_count(&self) -> Option<usize> {
        match self {
            ScoreSource::Beta { label_count, .. } => *label_count,
            ScoreSource::Pool { samples } => samples.iter().filter_map(|s| s.label).max().map(|l| l + 1),
        }
    }

    pub fn is_pool(&self) -> bool {
        matches!(self, ScoreSource::Pool { .. })
    }

    /// One draw; pools are sampled with replacement.
    pub fn draw(&self, rng: &mut Rng, id: String) -> ScoreSample {
        match self {
            ScoreSource::Beta { dist, labels, .. } => {
                let confidence: f64 = dist.sample(rng);
                ScoreSample {
                    id,
                    label: labels.as_ref().map(|l| l.sample(rng)),
                    confidence: confidence.clamp(0.0, 1.0),
                }
            }
            ScoreSource::Pool { samples } => samples[rng.gen_range(0..samples.len())].clone(),
        }
    }

    pub fn draw_many(&self, n: usize, seed: u64, prefix: &str) -> Vec<ScoreSample> {
        let mut r = rng::seeded(seed);
        (0..n).map(|i| self.draw(&mut r, format!("{prefix}{i}"))).collect()
    }

    /// Split a pool into disjoint calibration and evaluation pools.
    /// Synthetic sources are returned unchanged on both sides.
    pub fn split(&self, calibration_fraction: f64, seed: u64) -> Result<(ScoreSource, ScoreSource)> {
        match self {
            ScoreSource::Pool { samples } => {
                if !(calibration_fraction > 0.0 && calibration_fraction < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "calibration fraction {calibration_fraction} must be in (0, 1)"
                    )));
                }
                let mut idx: Vec<usize> = (0..samples.len()).collect();
                idx.shuffle(&mut rng::seeded(seed));
                let cut = ((samples.len() as f64) * calibration_fraction).round() as usize;
                let cut = cut.clamp(1, samples.len().saturating_sub(1));
                if cut == 0 || cut >= samples.len() {
                    return Err(Error::InsufficientData {
                        needed: 2,
                        got: samples.len(),
                    });
                }
                let pick = |ids: &[usize]| ids.iter().map(|&i| samples[i].clone()).collect::<Vec<_>>();
                Ok((Self::pool(pick(&idx[..cut]))?, Self::pool(pick(&idx[cut..]))?))
            }
            other => Ok((other.clone(), other.clone())),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            ScoreSource::Beta { a, b, label_count, .. } => match label_count {
                Some(k) => format!("beta({a}, {b}) with {k} labels"),
                None => format!("beta({a}, {b})"),
            },
            ScoreSource::Pool { samples } => format!("pool of {}", samples.len()),
        }
    }
}

/// Blend of a reference and an alternative source.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub reference: ScoreSource,
    pub alternative: ScoreSource,
    pub rho: f64,
}

impl MixtureSpec {
    pub fn new(reference: ScoreSource, alternative: ScoreSource, rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter(format!("mixture proportion {rho} not in [0, 1]")));
        }
        Ok(Self {
            reference,
            alternative,
            rho,
        })
    }

    /// Alternative samples in a batch of `m`.
    pub fn alternative_count(&self, m: usize) -> usize {
        ((self.rho * m as f64).round() as usize).min(m)
    }
}

/// A sample together with which mixture component produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedSample {
    pub sample: ScoreSample,
    pub alternative: bool,
}

/// Draw one mixture batch with exactly `round(ρ·m)` alternative samples at
/// shuffled positions.
pub fn sample_mixture_batch(mixture: &MixtureSpec, m: usize, rng: &mut Rng) -> Result<Vec<TaggedSample>> {
    if m == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    let k = mixture.alternative_count(m);
    let mut flags: Vec<bool> = (0..m).map(|i| i < k).collect();
    flags.shuffle(rng);
    Ok(flags
        .into_iter()
        .enumerate()
        .map(|(i, alternative)| {
            let src = if alternative {
                &mixture.alternative
            } else {
                &mixture.reference
            };
            let mut sample = src.draw(rng, format!("b{i}"));
            sample.id = format!("b{i}");
            TaggedSample { sample, alternative }
        })
        .collect())
}

/// Draw one batch from a single source.
pub fn sample_batch(source: &ScoreSource, m: usize, rng: &mut Rng) -> Result<Vec<ScoreSample>> {
    if m == 0 {
        return Err(Error::InvalidParameter("batch size must be at least 1".into()));
    }
    Ok((0..m)
        .map(|i| {
            let mut s = source.draw(rng, format!("b{i}"));
            s.id = format!("b{i}");
            s
        })
        .collect())
}

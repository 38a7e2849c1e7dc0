//! Mergeable constant-memory summary of a confidence stream.
//!
//! This is a merging t-digest using the arcsine scale function
//! `k(q) = δ/(2π) · asin(2q − 1)`: a run of adjacent centroids may be fused
//! only while it spans at most one unit of `k`. Centroids near the tails
//! therefore stay small and the middle gets coarse, which is what quantile
//! extraction at the extremes needs.

use serde::{Deserialize, Serialize};

use super::{CalibrationModel, JitterParams, ModelMeta, check_unit, dedupe_jitter};
use crate::error::{Error, Result};

pub const DEFAULT_COMPRESSION: f64 = 100.0;

/// Raw centroids allowed to pile up between compressions, per unit of δ.
const BUFFER_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub mean: f64,
    pub weight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSketch {
    compression: f64,
    centroids: Vec<Centroid>,
    total_weight: u64,
    min: f64,
    max: f64,
}

impl Default for QuantileSketch {
    fn default() -> Self {
        Self::new(DEFAULT_COMPRESSION).expect("default compression is valid")
    }
}

impl QuantileSketch {
    pub fn new(compression: f64) -> Result<Self> {
        if !(compression.is_finite() && compression >= 4.0) {
            return Err(Error::InvalidParameter(format!(
                "compression {compression} must be a finite value >= 4"
            )));
        }
        Ok(Self {
            compression,
            centroids: Vec::new(),
            total_weight: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        })
    }

    /// Upper bound on the number of centroids held at any time.
    pub fn centroid_cap(compression: f64) -> usize {
        (BUFFER_FACTOR * compression).ceil() as usize
    }

    pub fn compression(&self) -> f64 {
        self.compression
    }

    pub fn centroids(&self) -> &[Centroid] {
        &self.centroids
    }

    pub fn total_weight(&self) -> u64 {
        self.total_weight
    }

    pub fn is_empty(&self) -> bool {
        self.total_weight == 0
    }

    pub fn insert(&mut self, value: f64) -> Result<()> {
        check_unit(value, "sketch value")?;
        let at = self.centroids.partition_point(|c| c.mean <= value);
        self.centroids.insert(
            at,
            Centroid {
                mean: value,
                weight: 1,
            },
        );
        self.total_weight += 1;
        self.min = self.min.min(value);
        self.max = self.max.max(value);
        if self.centroids.len() > Self::centroid_cap(self.compression) {
            self.compress();
        }
        Ok(())
    }

    pub fn extend<I: IntoIterator<Item = f64>>(&mut self, values: I) -> Result<()> {
        values.into_iter().try_for_each(|v| self.insert(v))
    }

    /// Combine two sketches. The result uses `self`'s compression.
    pub fn merge(&self, other: &QuantileSketch) -> QuantileSketch {
        if other.is_empty() {
            return self.clone();
        }
        if self.is_empty() {
            let mut out = other.clone();
            out.compression = self.compression;
            if out.centroids.len() > Self::centroid_cap(out.compression) {
                out.compress();
            }
            return out;
        }
        let mut centroids = Vec::with_capacity(self.centroids.len() + other.centroids.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.centroids, &other.centroids);
        while i < a.len() && j < b.len() {
            if a[i].mean <= b[j].mean {
                centroids.push(a[i]);
                i += 1;
            } else {
                centroids.push(b[j]);
                j += 1;
            }
        }
        centroids.extend_from_slice(&a[i..]);
        centroids.extend_from_slice(&b[j..]);
        let mut out = QuantileSketch {
            compression: self.compression,
            centroids,
            total_weight: self.total_weight + other.total_weight,
            min: self.min.min(other.min),
            max: self.max.max(other.max),
        };
        if out.centroids.len() > Self::centroid_cap(out.compression) {
            out.compress();
        }
        out
    }

    fn k_of_q(&self, q: f64) -> f64 {
        self.compression / (2.0 * std::f64::consts::PI) * (2.0 * q - 1.0).clamp(-1.0, 1.0).asin()
    }

    fn q_of_k(&self, k: f64) -> f64 {
        let angle = (2.0 * std::f64::consts::PI * k / self.compression)
            .clamp(-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
        (1.0 + angle.sin()) / 2.0
    }

    /// Fuse adjacent centroids under the scale-function size limit.
    pub fn compress(&mut self) {
        if self.centroids.len() <= 1 {
            return;
        }
        let total = self.total_weight as f64;
        let mut out = Vec::with_capacity(self.compression.ceil() as usize);
        let mut current = self.centroids[0];
        let mut weight_before = 0.0;
        let mut limit = total * self.q_of_k(self.k_of_q(0.0) + 1.0);
        for &c in &self.centroids[1..] {
            let proposed = weight_before + (current.weight + c.weight) as f64;
            if proposed <= limit {
                let w = current.weight + c.weight;
                current.mean += (c.mean - current.mean) * c.weight as f64 / w as f64;
                current.weight = w;
            } else {
                weight_before += current.weight as f64;
                out.push(current);
                current = c;
                limit = total * self.q_of_k(self.k_of_q(weight_before / total) + 1.0);
            }
        }
        out.push(current);
        self.centroids = out;
    }

    /// Interpolated quantile at level `q` in `[0, 1]`.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        check_unit(q, "quantile level")?;
        if self.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        let cs = &self.centroids;
        let total = self.total_weight as f64;
        let target = q * total;

        let first_center = cs[0].weight as f64 / 2.0;
        if target <= first_center {
            if cs[0].weight == 1 {
                return Ok(cs[0].mean);
            }
            return Ok(lerp(self.min, cs[0].mean, target / first_center));
        }
        let last = cs[cs.len() - 1];
        let last_center = total - last.weight as f64 / 2.0;
        if target >= last_center {
            if last.weight == 1 {
                return Ok(last.mean);
            }
            let span = total - last_center;
            return Ok(lerp(last.mean, self.max, (target - last_center) / span));
        }

        let mut cum = 0.0;
        for pair in cs.windows(2) {
            let left_center = cum + pair[0].weight as f64 / 2.0;
            let right_center = cum + pair[0].weight as f64 + pair[1].weight as f64 / 2.0;
            if target <= right_center {
                let t = (target - left_center) / (right_center - left_center);
                return Ok(lerp(pair[0].mean, pair[1].mean, t));
            }
            cum += pair[0].weight as f64;
        }
        Ok(last.mean)
    }

    /// Extract a calibration model from `breakpoint_count` midpoint quantiles
    /// `(k - 0.5) / breakpoint_count`, de-duplicated with `jitter`.
    pub fn to_model(&self, breakpoint_count: usize, jitter: JitterParams) -> Result<CalibrationModel> {
        if breakpoint_count < 2 {
            return Err(Error::InvalidParameter(format!(
                "breakpoint count {breakpoint_count} must be at least 2"
            )));
        }
        if breakpoint_count as u64 > self.total_weight {
            return Err(Error::InsufficientData {
                needed: breakpoint_count,
                got: self.total_weight as usize,
            });
        }
        let mut settled = self.clone();
        settled.compress();
        let b = breakpoint_count as f64;
        let levels = (1..=breakpoint_count)
            .map(|k| settled.quantile((k as f64 - 0.5) / b))
            .collect::<Result<Vec<_>>>()?;
        let mut breakpoints = dedupe_jitter(&levels, jitter.epsilon, jitter.seed)?;
        breakpoints.sort_by(f64::total_cmp);
        CalibrationModel::from_breakpoints(
            breakpoints,
            ModelMeta {
                created: None,
                source: format!(
                    "sketch(compression={}, weight={})",
                    self.compression, self.total_weight
                ),
                jitter,
            },
        )
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::*;
    use rand_distr::{Beta, Distribution};

    fn beta_draws(a: f64, b: f64, n: usize, seed: u64) -> Vec<f64> {
        let dist = Beta::new(a, b).unwrap();
        let mut r = rng::seeded(seed);
        (0..n).map(|_| dist.sample(&mut r)).collect()
    }

    fn check_invariants(s: &QuantileSketch) {
        let cs = s.centroids();
        assert!(cs.windows(2).all(|w| w[0].mean <= w[1].mean));
        assert_eq!(cs.iter().map(|c| c.weight).sum::<u64>(), s.total_weight());
        assert!(cs.len() <= QuantileSketch::centroid_cap(s.compression()));
        assert!(cs.iter().all(|c| c.weight > 0));
    }

    #[test]
    fn single_insert() {
        let mut s = QuantileSketch::default();
        s.insert(0.5).unwrap();
        assert_eq!(
            s.centroids(),
            &[Centroid {
                mean: 0.5,
                weight: 1
            }]
        );
        assert_eq!(s.total_weight(), 1);
    }

    #[test]
    fn merge_with_empty_is_identity() {
        let mut s = QuantileSketch::default();
        s.extend(beta_draws(5.0, 1.0, 2_000, 1)).unwrap();
        assert_eq!(s.merge(&QuantileSketch::default()), s);
        let other = QuantileSketch::default().merge(&s);
        assert_eq!(other.centroids(), s.centroids());
    }

    #[test]
    fn rejects_out_of_range() {
        let mut s = QuantileSketch::default();
        assert!(matches!(s.insert(1.5), Err(Error::Domain(_))));
        assert!(QuantileSketch::new(0.0).is_err());
    }

    #[test]
    fn to_model_errors() {
        let mut s = QuantileSketch::default();
        s.extend([0.1, 0.2, 0.3]).unwrap();
        assert!(matches!(
            s.to_model(4, JitterParams::default()),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        ));
        assert!(matches!(
            s.to_model(1, JitterParams::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn small_stream_is_exact() {
        let mut s = QuantileSketch::default();
        s.extend([0.8, 0.2, 0.5]).unwrap();
        let m = s.to_model(3, JitterParams::default()).unwrap();
        assert_eq!(m.breakpoints(), &[0.2, 0.5, 0.8]);
    }

    #[test]
    fn centroid_count_independent_of_stream_length() {
        let mut s = QuantileSketch::default();
        let cap = QuantileSketch::centroid_cap(DEFAULT_COMPRESSION);
        let mut peak = 0;
        for x in beta_draws(5.0, 1.0, 300_000, 9) {
            s.insert(x).unwrap();
            peak = peak.max(s.centroids().len());
        }
        assert!(peak <= cap, "peak {peak} > cap {cap}");
        check_invariants(&s);
    }

    #[test]
    fn fidelity_against_exact_model() {
        let draws = beta_draws(5.0, 1.0, 50_000, 3);
        let exact = CalibrationModel::build(&draws, JitterParams::default()).unwrap();
        let mut s = QuantileSketch::new(100.0).unwrap();
        s.extend(draws.iter().copied()).unwrap();
        let approx = s.to_model(2_000, JitterParams::default()).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=1000 {
            let p = i as f64 / 1000.0;
            let d = (exact.uniformize(p).unwrap() - approx.uniformize(p).unwrap()).abs();
            worst = worst.max(d);
        }
        for &z in exact.breakpoints().iter().step_by(97) {
            let d = (exact.uniformize(z).unwrap() - approx.uniformize(z).unwrap()).abs();
            worst = worst.max(d);
        }
        assert!(worst <= 0.01, "max deviation {worst}");
    }

    #[test]
    fn merge_is_close_to_commutative() {
        let mut a = QuantileSketch::default();
        let mut b = QuantileSketch::default();
        a.extend(beta_draws(5.0, 1.0, 20_000, 4)).unwrap();
        b.extend(beta_draws(2.0, 2.0, 20_000, 5)).unwrap();
        let ab = a.merge(&b);
        let ba = b.merge(&a);
        check_invariants(&ab);
        assert_eq!(ab.total_weight(), 40_000);
        for i in 1..100 {
            let q = i as f64 / 100.0;
            let d = (ab.quantile(q).unwrap() - ba.quantile(q).unwrap()).abs();
            assert!(d < 0.01, "q={q} d={d}");
        }
    }

    proptest! {
        #[test]
        fn insert_and_merge_keep_invariants(
            xs in prop::collection::vec(0.0f64..=1.0, 0..3000),
            ys in prop::collection::vec(0.0f64..=1.0, 0..3000),
            compression in 10.0f64..200.0,
        ) {
            let mut a = QuantileSketch::new(compression).unwrap();
            let mut b = QuantileSketch::new(compression).unwrap();
            a.extend(xs.iter().copied()).unwrap();
            b.extend(ys.iter().copied()).unwrap();
            check_invariants(&a);
            check_invariants(&b);
            let m = a.merge(&b);
            check_invariants(&m);
            prop_assert_eq!(m.total_weight(), (xs.len() + ys.len()) as u64);
        }
    }
}

//! Per-dimension Parzen estimators used by TPE.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::space::{Domain, Space};

/// Smallest kernel width is `range / min(MAX_FLOOR_DIVISOR, n + 1)` for
/// `n` observations, so never below 1% of the range.
const MAX_FLOOR_DIVISOR: f64 = 100.0;
const MAX_REJECTIONS: usize = 1000;

/// Equal-weight mixture of Gaussians truncated to `[low, high]`: one per
/// observation plus a broad prior at the midpoint. Works in `ln` space for
/// log dimensions.
#[derive(Debug, Clone)]
pub struct FloatParzen {
    low: f64,
    high: f64,
    log: bool,
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    /// Probability mass of each component inside `[low, high]`.
    mass: Vec<f64>,
}

impl FloatParzen {
    pub fn fit(observations: &[f64], low: f64, high: f64, log: bool) -> Self {
        let (lo, hi) = if log { (low.ln(), high.ln()) } else { (low, high) };
        let range = hi - lo;
        let mut obs: Vec<f64> = observations.iter().map(|&v| if log { v.ln() } else { v }.clamp(lo, hi)).collect();
        obs.sort_by(f64::total_cmp);

        let mut mus = Vec::with_capacity(obs.len() + 1);
        let mut sigmas = Vec::with_capacity(obs.len() + 1);
        let floor = range / (obs.len() as f64 + 1.0).min(MAX_FLOOR_DIVISOR);
        for (i, &mu) in obs.iter().enumerate() {
            let left = if i == 0 { lo } else { obs[i - 1] };
            let right = if i + 1 == obs.len() { hi } else { obs[i + 1] };
            let spread = (mu - left).max(right - mu);
            mus.push(mu);
            sigmas.push(spread.clamp(floor, range));
        }
        mus.push(0.5 * (lo + hi));
        sigmas.push(range);

        let mass =
            mus.iter().zip(&sigmas).map(|(&m, &s)| normal_cdf((hi - m) / s) - normal_cdf((lo - m) / s)).collect();
        Self { low: lo, high: hi, log, mus, sigmas, mass }
    }

    /// Log density at `x` (in the dimension's own units), with respect to
    /// the internal (possibly log-transformed) coordinate.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = if self.log { x.ln() } else { x };
        self.log_pdf_internal(z)
    }

    pub(crate) fn log_pdf_internal(&self, z: f64) -> f64 {
        if !(self.low..=self.high).contains(&z) {
            return f64::NEG_INFINITY;
        }
        let k = self.mus.len() as f64;
        let p: f64 = self
            .mus
            .iter()
            .zip(&self.sigmas)
            .zip(&self.mass)
            .map(|((&m, &s), &w)| normal_pdf((z - m) / s) / (s * w))
            .sum();
        (p / k).ln()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let c = rng.random_range(0..self.mus.len());
        let normal = Normal::new(self.mus[c], self.sigmas[c]).expect("positive bandwidth");
        let z = (0..MAX_REJECTIONS)
            .map(|_| normal.sample(rng))
            .find(|z| (self.low..=self.high).contains(z))
            .unwrap_or_else(|| rng.random_range(self.low..=self.high));
        if self.log {
            z.exp()
        } else {
            z
        }
    }

    pub fn components(&self) -> (&[f64], &[f64]) {
        (&self.mus, &self.sigmas)
    }
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Add-one smoothed category frequencies.
#[derive(Debug, Clone)]
pub struct ChoiceParzen {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl ChoiceParzen {
    pub fn fit(observations: &[f64], values: &[f64]) -> Self {
        let weights = values.iter().map(|v| 1.0 + observations.iter().filter(|&&o| o == *v).count() as f64).collect();
        Self { values: values.to_vec(), weights }
    }

    /// Log probability of `x` among the `admissible` value indices.
    pub fn log_pmf(&self, x: f64, admissible: &[usize]) -> f64 {
        let total: f64 = admissible.iter().map(|&i| self.weights[i]).sum();
        admissible.iter().find(|&&i| self.values[i] == x).map_or(f64::NEG_INFINITY, |&i| (self.weights[i] / total).ln())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, admissible: &[usize]) -> f64 {
        let total: f64 = admissible.iter().map(|&i| self.weights[i]).sum();
        let mut u = rng.random_range(0.0..total);
        for &i in admissible {
            if u < self.weights[i] {
                return self.values[i];
            }
            u -= self.weights[i];
        }
        self.values[*admissible.last().expect("non-empty admissible set")]
    }
}

#[derive(Debug, Clone)]
enum DimEstimator {
    Float(FloatParzen),
    Choice(ChoiceParzen),
}

/// Independent per-dimension estimators over a [`Space`].
#[derive(Debug, Clone)]
pub struct ParzenEstimator {
    dims: Vec<DimEstimator>,
}

impl ParzenEstimator {
    pub fn fit(space: &Space, points: &[&[f64]]) -> Self {
        let dims = space
            .dims()
            .iter()
            .enumerate()
            .map(|(d, dim)| {
                let obs: Vec<f64> = points.iter().map(|p| p[d]).collect();
                match &dim.domain {
                    Domain::Float { low, high, log } => DimEstimator::Float(FloatParzen::fit(&obs, *low, *high, *log)),
                    Domain::Choice { values, .. } => DimEstimator::Choice(ChoiceParzen::fit(&obs, values)),
                }
            })
            .collect();
        Self { dims }
    }

    pub fn sample<R: Rng + ?Sized>(&self, space: &Space, rng: &mut R) -> Vec<f64> {
        let mut point = Vec::with_capacity(self.dims.len());
        for (d, est) in self.dims.iter().enumerate() {
            let v = match est {
                DimEstimator::Float(f) => f.sample(rng),
                DimEstimator::Choice(c) => c.sample(rng, &space.admissible(d, &point)),
            };
            point.push(v);
        }
        point
    }

    /// Sum of per-dimension log densities; choice dimensions are
    /// conditioned on their admissible values.
    pub fn log_density(&self, space: &Space, point: &[f64]) -> f64 {
        self.dims
            .iter()
            .enumerate()
            .map(|(d, est)| match est {
                DimEstimator::Float(f) => f.log_pdf(point[d]),
                DimEstimator::Choice(c) => c.log_pmf(point[d], &space.admissible(d, point)),
            })
            .sum()
    }
}

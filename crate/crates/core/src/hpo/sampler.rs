//! Random and TPE samplers.

use rand::Rng;

use super::pareto::{split_good_bad, Objectives};
use super::parzen::ParzenEstimator;
use super::space::Space;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplerKind {
    #[default]
    Tpe,
    Random,
}

impl std::str::FromStr for SamplerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "tpe" => Ok(SamplerKind::Tpe),
            "random" => Ok(SamplerKind::Random),
            other => Err(format!("unknown sampler '{other}' (expected tpe or random)")),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SamplerKind::Tpe => "tpe",
            SamplerKind::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TpeConfig {
    /// Fraction of the history used to fit the "good" density.
    pub gamma: f64,
    pub n_candidates: usize,
    /// Completed trials required before the model is used.
    pub n_startup: usize,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self { gamma: 0.25, n_candidates: 24, n_startup: 10 }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return invalid(format!("gamma must be in (0, 1), got {}", self.gamma));
        }
        if self.n_candidates == 0 {
            return invalid("n_candidates must be at least 1");
        }
        Ok(())
    }
}

/// A completed evaluation the samplers learn from.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub point: Vec<f64>,
    pub objectives: Objectives,
}

pub fn random_suggest<R: Rng + ?Sized>(space: &Space, rng: &mut R) -> Vec<f64> {
    space.sample_uniform(rng)
}

/// Proposes the next point. Below `n_startup` observations (or with fewer
/// than two) this is a uniform draw; otherwise candidates are drawn from
/// the density of the good trials and the one maximizing
/// `log l(x) - log g(x)` is returned (first on ties).
pub fn tpe_suggest<R: Rng + ?Sized>(
    history: &[Observation],
    space: &Space,
    config: &TpeConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    config.validate()?;
    if space.is_empty() {
        return invalid("search space has no dimensions");
    }
    if history.len() < config.n_startup.max(2) {
        return Ok(random_suggest(space, rng));
    }
    let objectives: Vec<Objectives> = history.iter().map(|o| o.objectives).collect();
    let (good, bad) = split_good_bad(&objectives, config.gamma);
    let pick = |idx: &[usize]| idx.iter().map(|&i| history[i].point.as_slice()).collect::<Vec<_>>();
    let l = ParzenEstimator::fit(space, &pick(&good));
    let g = ParzenEstimator::fit(space, &pick(&bad));

    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..config.n_candidates {
        let x = l.sample(space, rng);
        let score = l.log_density(space, &x) - g.log_density(space, &x);
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, x));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hpo::space::{Dimension, SearchSpace};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quadratic_space() -> Space {
        Space::new(vec![Dimension::float("x", 0.0, 10.0, false)]).unwrap()
    }

    /// Best |x - 2| after `n` trials maximizing -(x - 2)^2.
    fn run(kind: SamplerKind, seed: u64, n: usize) -> f64 {
        let space = quadratic_space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut history: Vec<Observation> = Vec::new();
        for _ in 0..n {
            let x = match kind {
                SamplerKind::Tpe => tpe_suggest(&history, &space, &TpeConfig::default(), &mut rng).unwrap(),
                SamplerKind::Random => random_suggest(&space, &mut rng),
            };
            let f = -(x[0] - 2.0).powi(2);
            history.push(Observation { point: x, objectives: [f, f] });
        }
        history.iter().map(|o| (o.point[0] - 2.0).abs()).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn tpe_beats_random_on_a_quadratic() {
        let hits = |kind| (0..10).filter(|&s| run(kind, s, 50) < 0.2).count();
        let (tpe, random) = (hits(SamplerKind::Tpe), hits(SamplerKind::Random));
        eprintln!("quadratic: tpe {tpe}/10, random {random}/10");
        assert!(tpe >= 9, "tpe {tpe}/10");
        assert!(tpe > random, "tpe {tpe}/10 vs random {random}/10");
    }

    #[test]
    fn startup_uses_uniform_draws() {
        let space = quadratic_space();
        let a = tpe_suggest(&[], &space, &TpeConfig::default(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = random_suggest(&space, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }

    #[test]
    fn suggestions_respect_the_codec_space() {
        let space = SearchSpace::default().space().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut history = Vec::new();
        for i in 0..40 {
            let p = tpe_suggest(&history, &space, &TpeConfig::default(), &mut rng).unwrap();
            assert!(space.contains(&p), "{p:?}");
            let obj = [p[0].ln() + i as f64 * 0.01, 1.0 / (1.0 + p[0])];
            history.push(Observation { point: p, objectives: obj });
        }
    }

    #[test]
    fn identical_densities_pick_the_first_candidate() {
        // every trial has the same objectives and point: l and g coincide
        let space = quadratic_space();
        let history: Vec<Observation> =
            (0..12).map(|_| Observation { point: vec![5.0], objectives: [1.0, 1.0] }).collect();
        let cfg = TpeConfig { gamma: 0.5, ..TpeConfig::default() };
        let picked = tpe_suggest(&history, &space, &cfg, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let refs: Vec<&[f64]> = history[..6].iter().map(|o| o.point.as_slice()).collect();
        let first = ParzenEstimator::fit(&space, &refs).sample(&space, &mut rng);
        assert_eq!(picked, first);
    }

    #[test]
    fn bad_config_is_rejected() {
        let space = quadratic_space();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for cfg in [TpeConfig { gamma: 1.0, ..Default::default() }, TpeConfig { n_candidates: 0, ..Default::default() }]
        {
            assert!(tpe_suggest(&[], &space, &cfg, &mut rng).is_err());
        }
    }
}

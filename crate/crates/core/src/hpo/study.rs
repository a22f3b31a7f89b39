//! Sequential optimization loop and study persistence.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pareto::{hypervolume, pareto_indices, Objectives};
use super::sampler::{random_suggest, tpe_suggest, Observation, SamplerKind, TpeConfig};
use super::space::{SearchSpace, Space};
use crate::codec::CodecParams;
use crate::color::{ColorMode, ImageBuffer};
use crate::dictionary::DictionaryCache;
use crate::error::{invalid, Error, Result};
use crate::metrics::evaluate;

/// One evaluated point.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub number: usize,
    /// Seed of the trial's own random stream.
    pub seed: u64,
    pub point: Vec<f64>,
    /// `None` when the evaluation failed.
    pub objectives: Option<Objectives>,
    pub seconds: f64,
    pub error: Option<String>,
}

impl Trial {
    pub fn is_complete(&self) -> bool {
        self.objectives.is_some()
    }
}

/// Seed of trial `index` in a study seeded with `seed` (SplitMix64 step).
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub sampler: SamplerKind,
    pub n_trials: usize,
    pub seed: u64,
    pub tpe: TpeConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { sampler: SamplerKind::Tpe, n_trials: 100, seed: 0, tpe: TpeConfig::default() }
    }
}

/// Indices of the Pareto-optimal complete trials, by ascending first
/// objective.
pub fn front_indices(trials: &[Trial]) -> Vec<usize> {
    let complete: Vec<usize> = (0..trials.len()).filter(|&i| trials[i].is_complete()).collect();
    let objs: Vec<Objectives> = complete.iter().map(|&i| trials[i].objectives.unwrap()).collect();
    pareto_indices(&objs).into_iter().map(|k| complete[k]).collect()
}

/// Hypervolume of the complete trials against `(0, 0)`.
pub fn study_hypervolume(trials: &[Trial]) -> f64 {
    let objs: Vec<Objectives> = trials.iter().filter_map(|t| t.objectives).collect();
    hypervolume(&objs)
}

/// Runs trials `history.len()..config.n_trials`, appending to `history`.
///
/// `objective` maps a point to its objectives; its errors mark the trial as
/// failed and do not stop the study. `progress` sees each finished trial
/// and the whole history so far.
pub fn run_study<F, P>(
    space: &Space,
    config: &StudyConfig,
    history: &mut Vec<Trial>,
    mut objective: F,
    mut progress: P,
) -> Result<()>
where
    F: FnMut(&[f64]) -> Result<Objectives>,
    P: FnMut(&Trial, &[Trial]) -> Result<()>,
{
    if config.n_trials == 0 {
        return invalid("a study needs at least one trial");
    }
    config.tpe.validate()?;
    for (i, t) in history.iter().enumerate() {
        if t.number != i || !space.contains(&t.point) {
            return invalid(format!("existing trial {} does not belong to this study", t.number));
        }
    }
    while history.len() < config.n_trials {
        let number = history.len();
        let seed = trial_seed(config.seed, number);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let point = match config.sampler {
            SamplerKind::Random => random_suggest(space, &mut rng),
            SamplerKind::Tpe => {
                let observed: Vec<Observation> = history
                    .iter()
                    .filter_map(|t| t.objectives.map(|o| Observation { point: t.point.clone(), objectives: o }))
                    .collect();
                tpe_suggest(&observed, space, &config.tpe, &mut rng)?
            }
        };
        let start = Instant::now();
        let outcome = objective(&point).and_then(|o| {
            if o.iter().all(|v| v.is_finite()) {
                Ok(o)
            } else {
                Err(Error::InvalidArgument(format!("non-finite objectives {o:?}")))
            }
        });
        let seconds = start.elapsed().as_secs_f64();
        let (objectives, error) = match outcome {
            Ok(o) => (Some(o), None),
            Err(e) => {
                log::warn!("trial {number} failed: {e}");
                (None, Some(e.to_string()))
            }
        };
        history.push(Trial { number, seed, point, objectives, seconds, error });
        progress(history.last().unwrap(), history)?;
    }
    Ok(())
}

/// What the compressed size is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OriginalSize {
    /// Uncompressed samples, `width * height * channels`.
    Raw,
    /// An explicit byte count, e.g. the size of the input file.
    Bytes(usize),
}

/// Everything [`optimize`] needs besides the image.
#[derive(Debug, Clone)]
pub struct CodecStudy {
    pub space: SearchSpace,
    pub config: StudyConfig,
    pub mode: ColorMode,
    pub original_size: OriginalSize,
}

impl CodecStudy {
    pub fn new(space: SearchSpace, config: StudyConfig, mode: ColorMode) -> Self {
        Self { space, config, mode, original_size: OriginalSize::Raw }
    }
}

/// Result of a codec study.
#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub trials: Vec<Trial>,
    /// Indices into `trials`.
    pub front: Vec<usize>,
}

impl StudyOutcome {
    pub fn front_trials(&self) -> Vec<&Trial> {
        self.front.iter().map(|&i| &self.trials[i]).collect()
    }

    pub fn hypervolume(&self) -> f64 {
        study_hypervolume(&self.trials)
    }
}

/// Searches codec parameters for `img`, maximizing compression rate and
/// SSIM. Trials in `resume` are kept and the study continues after them.
pub fn optimize<P>(
    img: &ImageBuffer,
    study: &CodecStudy,
    cache: &DictionaryCache,
    resume: Vec<Trial>,
    progress: P,
) -> Result<StudyOutcome>
where
    P: FnMut(&Trial, &[Trial]) -> Result<()>,
{
    let space = study.space.space()?;
    let original = match study.original_size {
        OriginalSize::Raw => img.raw_len(),
        OriginalSize::Bytes(n) => n,
    };
    let mut trials = resume;
    run_study(
        &space,
        &study.config,
        &mut trials,
        |point| {
            let params = SearchSpace::params_from_point(point)?;
            let bank = cache.bank(params.min_n, params.max_n, params.a_cols)?;
            let (eval, _, _) = evaluate(img, study.mode, &params, &bank, original)?;
            Ok([eval.compression_rate, eval.ssim])
        },
        progress,
    )?;
    let front = front_indices(&trials);
    Ok(StudyOutcome { trials, front })
}

/// One CSV row of a codec study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub max_error: f64,
    pub min_sparsity: f64,
    pub min_n: usize,
    pub max_n: usize,
    pub a_cols: usize,
    pub cr: Option<f64>,
    pub ssim: Option<f64>,
    pub seconds: f64,
    pub pareto: bool,
    pub status: String,
}

const STATUS_COMPLETE: &str = "complete";
const STATUS_FAILED: &str = "failed";

pub fn trial_records(trials: &[Trial]) -> Result<Vec<TrialRecord>> {
    let front = front_indices(trials);
    trials
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let p: CodecParams = SearchSpace::params_from_point(&t.point)?;
            Ok(TrialRecord {
                trial: t.number,
                seed: t.seed,
                max_error: p.max_error,
                min_sparsity: p.min_sparsity,
                min_n: p.min_n,
                max_n: p.max_n,
                a_cols: p.a_cols,
                cr: t.objectives.map(|o| o[0]),
                ssim: t.objectives.map(|o| o[1]),
                seconds: t.seconds,
                pareto: front.contains(&i),
                status: if t.is_complete() { STATUS_COMPLETE } else { STATUS_FAILED }.into(),
            })
        })
        .collect()
}

/// Writes the whole study, replacing `path` atomically.
pub fn write_study_csv(path: &Path, trials: &[Trial]) -> Result<()> {
    let records = trial_records(trials)?;
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = csv::Writer::from_path(&tmp)?;
        for r in &records {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn read_study_csv(path: &Path) -> Result<Vec<Trial>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut trials = Vec::new();
    for rec in r.deserialize() {
        let rec: TrialRecord = rec?;
        let objectives = match (rec.status.as_str(), rec.cr, rec.ssim) {
            (STATUS_COMPLETE, Some(cr), Some(ssim)) => Some([cr, ssim]),
            (STATUS_FAILED, _, _) => None,
            _ => return invalid(format!("trial {} has an inconsistent status or objectives", rec.trial)),
        };
        trials.push(Trial {
            number: rec.trial,
            seed: rec.seed,
            point: vec![rec.max_error, rec.min_sparsity, rec.min_n as f64, rec.max_n as f64, rec.a_cols as f64],
            error: objectives.is_none().then(|| "failed in an earlier run".to_string()),
            objectives,
            seconds: rec.seconds,
        });
    }
    Ok(trials)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::PixelFormat;
    use crate::hpo::space::Dimension;

    fn toy_space() -> Space {
        Space::new(vec![Dimension::float("x", 0.0, 1.0, false), Dimension::choice("c", vec![1.0, 2.0], None)]).unwrap()
    }

    fn toy_objective(p: &[f64]) -> Result<Objectives> {
        Ok([p[0] * p[1], 1.0 - p[0]])
    }

    #[test]
    fn single_trial_is_its_own_front() {
        let mut h = Vec::new();
        let cfg = StudyConfig { n_trials: 1, ..Default::default() };
        run_study(&toy_space(), &cfg, &mut h, toy_objective, |_, _| Ok(())).unwrap();
        assert_eq!(h.len(), 1);
        assert_eq!(front_indices(&h), vec![0]);
    }

    #[test]
    fn random_study_is_reproducible_and_resumable() {
        let cfg = StudyConfig { sampler: SamplerKind::Random, n_trials: 30, seed: 7, ..Default::default() };
        let mut a = Vec::new();
        run_study(&toy_space(), &cfg, &mut a, toy_objective, |_, _| Ok(())).unwrap();
        let mut b = Vec::new();
        run_study(&toy_space(), &cfg, &mut b, toy_objective, |_, _| Ok(())).unwrap();
        let strip = |v: &[Trial]| v.iter().map(|t| (t.seed, t.point.clone(), t.objectives)).collect::<Vec<_>>();
        assert_eq!(strip(&a), strip(&b));

        for sampler in [SamplerKind::Random, SamplerKind::Tpe] {
            let cfg = StudyConfig { sampler, ..cfg };
            let mut full = Vec::new();
            run_study(&toy_space(), &cfg, &mut full, toy_objective, |_, _| Ok(())).unwrap();
            let mut part: Vec<Trial> = full[..17].to_vec();
            run_study(&toy_space(), &cfg, &mut part, toy_objective, |_, _| Ok(())).unwrap();
            assert_eq!(strip(&part), strip(&full));
        }
    }

    #[test]
    fn failures_are_recorded_not_fatal() {
        let cfg = StudyConfig { n_trials: 25, seed: 1, ..Default::default() };
        let mut h = Vec::new();
        let mut seen = 0;
        run_study(
            &toy_space(),
            &cfg,
            &mut h,
            |p| if p[0] < 0.3 { invalid("boom") } else { toy_objective(p) },
            |_, all| {
                seen = all.len();
                Ok(())
            },
        )
        .unwrap();
        assert_eq!((h.len(), seen), (25, 25));
        assert!(h.iter().any(|t| !t.is_complete()));
        assert!(front_indices(&h).iter().all(|&i| h[i].is_complete()));
    }

    #[test]
    fn rejects_zero_trials_and_foreign_history() {
        let mut h = Vec::new();
        let cfg = StudyConfig { n_trials: 0, ..Default::default() };
        assert!(run_study(&toy_space(), &cfg, &mut h, toy_objective, |_, _| Ok(())).is_err());
        let mut h =
            vec![Trial { number: 0, seed: 0, point: vec![5.0, 1.0], objectives: None, seconds: 0.0, error: None }];
        let cfg = StudyConfig { n_trials: 2, ..Default::default() };
        assert!(run_study(&toy_space(), &cfg, &mut h, toy_objective, |_, _| Ok(())).is_err());
    }

    #[test]
    fn codec_study_round_trips_through_csv() {
        let samples: Vec<u8> = (0..32 * 32).map(|i| ((i * 37) % 256) as u8).collect();
        let img = ImageBuffer::new(32, 32, PixelFormat::Gray8, samples).unwrap();
        let space =
            SearchSpace { min_n: vec![4, 8], max_n: vec![4, 8, 16], a_cols: vec![2, 8, 16], ..SearchSpace::default() };
        let study =
            CodecStudy::new(space, StudyConfig { n_trials: 12, seed: 3, ..Default::default() }, ColorMode::Gray);
        let cache = DictionaryCache::default();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.csv");
        let out = optimize(&img, &study, &cache, Vec::new(), |_, all| write_study_csv(&path, all)).unwrap();
        assert_eq!(out.trials.len(), 12);
        assert!(out.trials.iter().all(Trial::is_complete));

        let back = read_study_csv(&path).unwrap();
        for (a, b) in back.iter().zip(&out.trials) {
            assert_eq!((a.number, a.seed, &a.point, a.objectives), (b.number, b.seed, &b.point, b.objectives));
        }
        let records = trial_records(&out.trials).unwrap();
        assert_eq!(records.iter().filter(|r| r.pareto).count(), out.front.len());

        let text = std::fs::read_to_string(&path).unwrap();
        assert!(
            text.starts_with("trial,seed,max_error,min_sparsity,min_n,max_n,a_cols,cr,ssim,seconds,pareto,status\n")
        );
    }

    #[test]
    fn trial_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| trial_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }
}

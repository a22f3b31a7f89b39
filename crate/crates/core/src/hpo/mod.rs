//! Multi-objective hyperparameter search over the codec parameters.
//!
//! Trials maximize compression rate and SSIM together. The TPE sampler
//! ranks the history by non-dominated sorting (hypervolume contribution
//! within a rank), fits Parzen densities `l` to the best `gamma` fraction
//! and `g` to the rest, and proposes the candidate drawn from `l` with the
//! largest `l / g`.

pub mod pareto;
pub mod parzen;
pub mod sampler;
pub mod space;
pub mod study;

pub use pareto::{dominates, hypervolume, pareto_indices, rank_order, split_good_bad, Objectives};
pub use parzen::{ChoiceParzen, FloatParzen, ParzenEstimator};
pub use sampler::{random_suggest, tpe_suggest, Observation, SamplerKind, TpeConfig};
pub use space::{Dimension, Domain, SearchSpace, Space, CODEC_DIMENSIONS};
pub use study::{
    front_indices, optimize, read_study_csv, run_study, study_hypervolume, trial_records, trial_seed, write_study_csv,
    CodecStudy, OriginalSize, StudyConfig, StudyOutcome, Trial, TrialRecord,
};

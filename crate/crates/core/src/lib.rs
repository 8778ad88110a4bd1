//! Engagement ranking from blended-learning survey data.
//!
//! The crate covers the whole analysis chain:
//!
//! 1. [`survey`]: load or synthesize respondent tables, derive the
//!    behavioural/cognitive/emotional composites, summarize and split them.
//! 2. [`gbrt`]: CART regression trees boosted under squared-error loss, with
//!    per-stage deviance curves.
//! 3. [`importance`]: mean-decrease-impurity and permutation importance and
//!    a consensus ranking of both.
//! 4. [`ahp`]: tiered Saaty-scale pairwise matrices, row geometric-mean
//!    weights and consistency checking.
//! 5. [`pipeline`]: seeded orchestration of all of the above plus report
//!    emission.

pub mod ahp;
pub mod gbrt;
pub mod importance;
pub mod pipeline;
pub mod seed;
pub mod survey;

pub use ahp::{AhpError, AhpPreset, AhpResult, PairwiseMatrix, TierAssignment};
pub use gbrt::{BoostedEnsemble, FeatureMatrix, GbrtError, LossCurve, RegressionTree, TrainConfig};
pub use importance::{ImportanceError, ImportanceVector, PermutationConfig, Ranking, Scorer};
pub use pipeline::{PipelineConfig, PipelineError, PipelineReport};
pub use survey::{RegressionProblem, SurveyError, SurveyRecord, SurveyTable, SynthSpec, Target};

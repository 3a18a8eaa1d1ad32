//! Evaluation protocol and dataset analyses.

mod analysis;
mod cv;
mod folds;
mod linear;
mod stats;

pub use analysis::{
    export_va_distribution, object_emotion_correlation, va_grid_words, ObjectCorrelation, VaDistribution, VaGrid,
    WordDictionary, WordEmotionEntry, GRID_BOUNDS,
};
pub use cv::{run_cv, run_cv_samples, CvOptions, CvReport, FoldResult, Learner};
pub use folds::{make_folds, FoldPlan};
pub use linear::{linear_baseline, LinearModel, DEFAULT_RIDGE};
pub use stats::{mean_squared_error, pearson};

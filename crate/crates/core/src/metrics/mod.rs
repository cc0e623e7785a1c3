//! Evaluation: tonal similarity, the discrimination t-test and survey means.

mod similarity;
mod survey;
mod ttest;

use thiserror::Error;

pub use similarity::{pitch_class_histogram, tonal_similarity, SimilarityReport, HOP_BEATS, WINDOW_BEATS};
pub use survey::{parse_survey_csv, survey_means, SurveyTable};
pub use ttest::{one_sample_ttest, parse_responses, TTestResult, DEFAULT_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("both scores are empty; no window to compare")]
    NoWindows,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("samples have zero variance")]
    ZeroVariance,
    #[error("no survey responses")]
    EmptySurvey,
    #[error("row {row}: expected {expected} ratings, found {found}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("row {row}, column {column}: rating {value} outside [1, 5]")]
    RatingOutOfRange { row: usize, column: usize, value: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

//! Linear-model evaluation of surprisal as a predictor of reading measures.
//!
//! A baseline regressor (intercept, region length, Zipf frequency) is
//! compared with a target that adds the focal surprisal and the length,
//! frequency and full-region surprisal of the two previous regions.
//! Predictive power is the held-out gain in R² and in Gaussian
//! log-likelihood under repeated k-fold cross-validation.

mod cv;
mod ols;
mod permutation;
mod predictors;
mod report;

use thiserror::Error;

pub use cv::{cross_validate, CvConfig, CvScores, FoldPlan, Summary};
pub use ols::{delta_llh, fit_ols, heldout_r2, OlsFit, VarianceSource};
pub use permutation::{permutation_test, Alternative};
pub use predictors::{
    build_rows, Exclusions, PredictorRow, RegressionData, RowKey, SurprisalIndex, BASELINE_COLUMNS, COLUMN_NAMES,
};
pub use report::{run_regression, Coefficients, PairwiseResult, RegressionReport, ReportConfig, SpecResult, VERSION};

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("degenerate design: {} linearly dependent on earlier columns", columns.join(", "))]
    Degenerate { columns: Vec<String> },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("held-out R² undefined: response has zero variance")]
    UndefinedR2,
    #[error("log-likelihood undefined: zero residual variance")]
    DegenerateLikelihood,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("seed {seed}, fold {fold}: {source}")]
    Fold { seed: usize, fold: usize, source: Box<RegressionError> },
    #[error("join: {0}")]
    Join(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

//! Fertilization classifier and density regressor: dataset schema,
//! scaling, oversampling, boosted trees, metrics, grouped cross-validation
//! and Shapley attributions.

mod cv;
mod dataset;
mod gbdt;
mod metrics;
mod scaler;
mod shapley;
mod smote;

use thiserror::Error;

pub use cv::{
    equal_interval_thresholds, linspace, loocv_classify, loocv_regress, regression_metrics, sweep, ClassifyConfig,
    FoldOutcome, FoldResults, LabelRule, LearningPoint, RegressionReport, SkippedFold, SweepCell, SweepReport,
    SweepSummary, MIN_GROUPS,
};
pub use dataset::{
    Dataset, SampleRecord, CLASSIFIER_FEATURES, FERTILIZER_COLUMN, REGRESSOR_FEATURES, REQUIRED_COLUMNS,
};
pub use gbdt::{
    gbdt_predict, gbdt_train, gradient_hessian, pointwise_loss, sigmoid, GbdtModel, GbdtParams, Node, Objective,
    Prediction, Tree,
};
pub use metrics::{binary_metrics, confusion, pr_auc, pr_curve, roc_auc, roc_curve, BinaryMetrics, Confusion};
pub use scaler::{apply_scaler, fit_scaler, Scaler};
pub use shapley::{shapley, shapley_values, Attribution};
pub use smote::{smote, DEFAULT_K};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("row {row}, column {column}: {message}")]
    Schema {
        row: usize,
        column: String,
        message: String,
    },
    #[error("i/o error: {0}")]
    Io(String),
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("feature {0} is constant")]
    ConstantFeature(String),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("logistic objective needs labels in {{0, 1}}")]
    NonBinaryLabels,
    #[error("background set is empty")]
    EmptyBackground,
    #[error("insufficient groups: need at least 3, got {0}")]
    InsufficientGroups(usize),
    #[error("threshold {threshold} outside observed nitrate range [{min}, {max}]")]
    ThresholdOutOfRange { threshold: f64, min: f64, max: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

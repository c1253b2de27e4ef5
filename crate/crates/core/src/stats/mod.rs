//! Rank tests, collinearity diagnostics and simple regressions.

mod descriptive;
mod nonparametric;
mod regression;

use thiserror::Error;

pub use descriptive::{average_ranks, mean, median, pearson, quantile, quantile_sorted, std_population};
pub use nonparametric::{
    kruskal_wallis, mann_whitney, mann_whitney_bonferroni, wilcoxon_signed_rank, wilcoxon_signed_rank_with,
    Alternative, Method, PairwiseResult, TestResult, WILCOXON_MIN_N,
};
pub use regression::{
    ols_line, r_squared, stratified_ols, stratified_ols_by, vif, LineFit, StratumFit, VifEntry, DEFAULT_CUTS, VIF_CAP,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("need at least 2 features, got {0}")]
    TooFewFeatures(usize),
    #[error("degenerate pairing: all differences are zero")]
    DegeneratePairing,
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("rows have inconsistent lengths")]
    RaggedRows,
    #[error("predictor is constant")]
    ConstantPredictor,
    #[error("invalid percentile cuts ({0}, {1})")]
    InvalidCuts(f64, f64),
}

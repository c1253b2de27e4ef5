use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, CLASSIFIER_FEATURES, REGRESSOR_FEATURES};
use super::gbdt::{gbdt_train, sigmoid, GbdtParams, Objective};
use super::metrics::{binary_metrics, pr_auc, pr_curve, roc_curve, BinaryMetrics};
use super::scaler::fit_scaler;
use super::shapley::shapley;
use super::smote::{smote, DEFAULT_K};
use super::MlError;
use crate::seed::derive_seed;
use crate::stats::{mean, pearson};

const FOLD_STREAM: u64 = 1;
const SMOTE_STREAM: u64 = 2;
const SWEEP_STREAM: u64 = 3;
const CURVE_STREAM: u64 = 4;

/// Minimum number of cross-validation groups.
pub const MIN_GROUPS: usize = 3;

/// How nitrate maps onto the binary label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Label 0 below the threshold, 1 at or above it.
    #[default]
    AboveIsPositive,
    /// Label 1 below the threshold, 0 at or above it.
    BelowIsPositive,
}

impl LabelRule {
    pub fn label(self, nitrate_ppm: f64, threshold_ppm: f64) -> u8 {
        let above = !(nitrate_ppm < threshold_ppm);
        match self {
            LabelRule::AboveIsPositive => above as u8,
            LabelRule::BelowIsPositive => (!above) as u8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub threshold_ppm: f64,
    pub n_images: usize,
    pub seed: u64,
    pub rule: LabelRule,
    pub params: GbdtParams,
    pub smote_k: usize,
    /// Compute mean |SHAP| per feature over held-out draws.
    pub shap: bool,
    /// Largest number of training rows used as the SHAP background.
    pub shap_background: usize,
    /// Fit one model on all data and record per-round training metrics.
    pub learning_curve: bool,
}

impl ClassifyConfig {
    pub fn new(threshold_ppm: f64, n_images: usize, seed: u64) -> Self {
        Self {
            threshold_ppm,
            n_images,
            seed,
            rule: LabelRule::default(),
            params: GbdtParams::default(),
            smote_k: DEFAULT_K,
            shap: false,
            shap_background: 100,
            learning_curve: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub leaf: String,
    pub truth: u8,
    /// Mean predicted probability over the drawn images.
    pub score: f64,
    pub predicted: u8,
    pub available_images: usize,
    pub with_replacement: bool,
    pub smote_applied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFold {
    pub leaf: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningPoint {
    pub round: usize,
    pub train_loss: f64,
    pub train_pr_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResults {
    pub threshold_ppm: f64,
    pub n_images: usize,
    pub seed: u64,
    pub folds: Vec<FoldOutcome>,
    pub skipped: Vec<SkippedFold>,
    pub metrics: BinaryMetrics,
    pub roc: Vec<(f64, f64)>,
    pub pr: Vec<(f64, f64)>,
    /// Mean |phi| per classifier feature, in feature order.
    pub shap_mean_abs: Option<Vec<(String, f64)>>,
    pub learning_curve: Option<Vec<LearningPoint>>,
}

fn leaf_name(key: &(String, String)) -> String {
    format!("{}/{}", key.0, key.1)
}

fn features(ds: &Dataset, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter()
        .map(|&i| ds.records[i].classifier_features().to_vec())
        .collect()
}

enum FoldResult {
    Done(FoldOutcome, Option<(Vec<f64>, usize)>),
    Skipped(SkippedFold),
}

/// Scales on `train`, oversamples when possible and fits the classifier.
fn fit_fold(
    x: &[Vec<f64>],
    y: &[u8],
    cfg: &ClassifyConfig,
    smote_seed: u64,
) -> Result<(super::scaler::Scaler, super::gbdt::GbdtModel, Vec<Vec<f64>>, bool), MlError> {
    let scaler = fit_scaler(x, &CLASSIFIER_FEATURES)?;
    let xs = scaler.transform(x);
    let minority = y
        .iter()
        .filter(|&&l| l == 1)
        .count()
        .min(y.iter().filter(|&&l| l == 0).count());
    let (xt, yt, applied) = if minority >= 2 {
        let (a, b) = smote(&xs, y, cfg.smote_k, smote_seed)?;
        (a, b, true)
    } else {
        (xs.clone(), y.to_vec(), false)
    };
    let yf: Vec<f64> = yt.iter().map(|&l| l as f64).collect();
    let model = gbdt_train(&xt, &yf, Objective::Logistic, &cfg.params)?;
    Ok((scaler, model, xs, applied))
}

/// Evenly spaced subset of at most `max` rows.
fn spread(rows: &[Vec<f64>], max: usize) -> Vec<Vec<f64>> {
    if rows.len() <= max {
        return rows.to_vec();
    }
    (0..max).map(|k| rows[k * rows.len() / max].clone()).collect()
}

/// Leave-one-compound-leaf-out evaluation of the fertilization classifier.
///
/// Each fold scales and oversamples its training rows only, trains a boosted
/// model, draws `n_images` rows of the held-out leaf (with replacement when
/// the leaf has fewer) and averages their predicted probabilities.
pub fn loocv_classify(ds: &Dataset, cfg: &ClassifyConfig) -> Result<FoldResults, MlError> {
    if cfg.n_images == 0 {
        return Err(MlError::InvalidParameter("n_images must be at least 1".into()));
    }
    let groups: Vec<((String, String), Vec<usize>)> = ds.leaf_groups().into_iter().collect();
    if groups.len() < MIN_GROUPS {
        return Err(MlError::InsufficientGroups(groups.len()));
    }
    let labels: Vec<u8> = ds
        .records
        .iter()
        .map(|r| cfg.rule.label(r.nitrate_ppm, cfg.threshold_ppm))
        .collect();
    if labels.iter().all(|&l| l == labels[0]) {
        return Err(MlError::SingleClass);
    }

    let outcomes: Vec<Result<FoldResult, MlError>> = groups
        .par_iter()
        .enumerate()
        .map(|(fold, (key, test_idx))| {
            let leaf = leaf_name(key);
            let train_idx: Vec<usize> = (0..ds.len()).filter(|i| !test_idx.contains(i)).collect();
            let y: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
            if y.iter().all(|&l| l == y[0]) {
                return Ok(FoldResult::Skipped(SkippedFold {
                    leaf,
                    reason: "training set has a single class".into(),
                }));
            }
            let x = features(ds, &train_idx);
            let (scaler, model, xs, smote_applied) =
                fit_fold(&x, &y, cfg, derive_seed(cfg.seed, SMOTE_STREAM, fold as u64))?;

            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, FOLD_STREAM, fold as u64));
            let available = test_idx.len();
            let with_replacement = available < cfg.n_images;
            let draws: Vec<usize> = if with_replacement {
                (0..cfg.n_images)
                    .map(|_| test_idx[rng.random_range(0..available)])
                    .collect()
            } else {
                sample(&mut rng, available, cfg.n_images)
                    .into_iter()
                    .map(|k| test_idx[k])
                    .collect()
            };
            let scaled: Vec<Vec<f64>> = draws
                .iter()
                .map(|&i| scaler.transform_row(&ds.records[i].classifier_features()))
                .collect();
            let score = scaled.iter().map(|r| sigmoid(model.margin(r))).sum::<f64>() / scaled.len() as f64;

            let shap_sum = if cfg.shap {
                let bg = spread(&xs, cfg.shap_background.max(1));
                let mut sum = vec![0.0; CLASSIFIER_FEATURES.len()];
                for r in &scaled {
                    let a = shapley(&model, r, &bg)?;
                    for (s, p) in sum.iter_mut().zip(&a.phi) {
                        *s += p.abs();
                    }
                }
                Some((sum, scaled.len()))
            } else {
                None
            };
            let truth = labels[test_idx[0]];
            Ok(FoldResult::Done(
                FoldOutcome {
                    leaf,
                    truth,
                    score,
                    predicted: (score >= 0.5) as u8,
                    available_images: available,
                    with_replacement,
                    smote_applied,
                },
                shap_sum,
            ))
        })
        .collect();

    let mut folds = Vec::new();
    let mut skipped = Vec::new();
    let mut shap_total = vec![0.0; CLASSIFIER_FEATURES.len()];
    let mut shap_count = 0usize;
    for o in outcomes {
        match o? {
            FoldResult::Done(f, s) => {
                if let Some((sum, n)) = s {
                    for (t, v) in shap_total.iter_mut().zip(sum) {
                        *t += v;
                    }
                    shap_count += n;
                }
                folds.push(f);
            }
            FoldResult::Skipped(s) => skipped.push(s),
        }
    }
    let truth: Vec<u8> = folds.iter().map(|f| f.truth).collect();
    let scores: Vec<f64> = folds.iter().map(|f| f.score).collect();
    let predicted: Vec<u8> = folds.iter().map(|f| f.predicted).collect();
    let metrics = binary_metrics(&truth, &scores, &predicted);

    let shap_mean_abs = (cfg.shap && shap_count > 0).then(|| {
        CLASSIFIER_FEATURES
            .iter()
            .zip(&shap_total)
            .map(|(n, s)| (n.to_string(), s / shap_count as f64))
            .collect()
    });
    let learning_curve = if cfg.learning_curve {
        Some(learning_curve(ds, &labels, cfg)?)
    } else {
        None
    };

    Ok(FoldResults {
        threshold_ppm: cfg.threshold_ppm,
        n_images: cfg.n_images,
        seed: cfg.seed,
        roc: roc_curve(&truth, &scores),
        pr: pr_curve(&truth, &scores),
        folds,
        skipped,
        metrics,
        shap_mean_abs,
        learning_curve,
    })
}

/// Per-round training loss and PR-AUC of one model fit on every row.
fn learning_curve(ds: &Dataset, labels: &[u8], cfg: &ClassifyConfig) -> Result<Vec<LearningPoint>, MlError> {
    let all: Vec<usize> = (0..ds.len()).collect();
    let x = features(ds, &all);
    let scaler = fit_scaler(&x, &CLASSIFIER_FEATURES)?;
    let xs = scaler.transform(&x);
    let minority = labels
        .iter()
        .filter(|&&l| l == 1)
        .count()
        .min(labels.iter().filter(|&&l| l == 0).count());
    let (xt, yt) = if minority >= 2 {
        smote(&xs, labels, cfg.smote_k, derive_seed(cfg.seed, CURVE_STREAM, 0))?
    } else {
        (xs, labels.to_vec())
    };
    let yf: Vec<f64> = yt.iter().map(|&l| l as f64).collect();
    let model = gbdt_train(&xt, &yf, Objective::Logistic, &cfg.params)?;
    let mut margins = vec![model.base_score; xt.len()];
    let mut points = Vec::with_capacity(model.trees.len() + 1);
    for round in 0..=model.trees.len() {
        if round > 0 {
            let tree = &model.trees[round - 1];
            for (m, r) in margins.iter_mut().zip(&xt) {
                *m += tree.predict(r);
            }
        }
        let loss = margins
            .iter()
            .zip(&yf)
            .map(|(&z, &t)| super::gbdt::pointwise_loss(Objective::Logistic, z, t))
            .sum::<f64>()
            / yf.len() as f64;
        let probs: Vec<f64> = margins.iter().map(|&z| sigmoid(z)).collect();
        points.push(LearningPoint {
            round,
            train_loss: loss,
            train_pr_auc: pr_auc(&yt, &probs),
        });
    }
    Ok(points)
}

/// `n` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Midpoints of `n` equal intervals spanning the observed nitrate range.
pub fn equal_interval_thresholds(ds: &Dataset, n: usize) -> Vec<f64> {
    let (lo, hi) = nitrate_range(ds);
    let width = (hi - lo) / n as f64;
    (0..n).map(|i| lo + width * (i as f64 + 0.5)).collect()
}

fn nitrate_range(ds: &Dataset) -> (f64, f64) {
    ds.records
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.nitrate_ppm), hi.max(r.nitrate_ppm))
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub threshold_ppm: f64,
    pub n_images: usize,
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub f1: Option<f64>,
    pub degenerate: bool,
    pub skipped_folds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n_images: usize,
    /// Mean ROC-AUC over non-degenerate thresholds.
    pub mroc: Option<f64>,
    pub mpr: Option<f64>,
    pub cells_used: usize,
    pub cells_degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seed: u64,
    pub cells: Vec<SweepCell>,
    pub summaries: Vec<SweepSummary>,
}

/// Runs the classifier for every (threshold, n_images) pair and averages the
/// AUCs over thresholds. Cells whose threshold leaves a single class are
/// marked degenerate and left out of the means.
pub fn sweep(
    ds: &Dataset,
    thresholds: &[f64],
    n_images: &[usize],
    base: &ClassifyConfig,
) -> Result<SweepReport, MlError> {
    let (lo, hi) = nitrate_range(ds);
    if let Some(&t) = thresholds.iter().find(|&&t| !(t >= lo && t <= hi)) {
        return Err(MlError::ThresholdOutOfRange {
            threshold: t,
            min: lo,
            max: hi,
        });
    }
    let grid: Vec<(f64, usize)> = n_images
        .iter()
        .flat_map(|&n| thresholds.iter().map(move |&t| (t, n)))
        .collect();
    let cells: Vec<Result<SweepCell, MlError>> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &(t, n))| {
            let mut cfg = base.clone();
            cfg.threshold_ppm = t;
            cfg.n_images = n;
            cfg.seed = derive_seed(base.seed, SWEEP_STREAM, k as u64);
            cfg.shap = false;
            cfg.learning_curve = false;
            match loocv_classify(ds, &cfg) {
                Ok(r) => {
                    let degenerate = r.metrics.roc_auc.is_none();
                    Ok(SweepCell {
                        threshold_ppm: t,
                        n_images: n,
                        roc_auc: r.metrics.roc_auc,
                        pr_auc: r.metrics.pr_auc,
                        f1: Some(r.metrics.f1),
                        degenerate,
                        skipped_folds: r.skipped.len(),
                    })
                }
                Err(MlError::SingleClass) => Ok(SweepCell {
                    threshold_ppm: t,
                    n_images: n,
                    roc_auc: None,
                    pr_auc: None,
                    f1: None,
                    degenerate: true,
                    skipped_folds: 0,
                }),
                Err(e) => Err(e),
            }
        })
        .collect();
    let cells: Vec<SweepCell> = cells.into_iter().collect::<Result<_, _>>()?;
    let summaries = n_images
        .iter()
        .map(|&n| {
            let used: Vec<&SweepCell> = cells.iter().filter(|c| c.n_images == n && !c.degenerate).collect();
            let avg = |f: &dyn Fn(&SweepCell) -> Option<f64>| -> Option<f64> {
                let v: Vec<f64> = used.iter().filter_map(|c| f(c)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            SweepSummary {
                n_images: n,
                mroc: avg(&|c| c.roc_auc),
                mpr: avg(&|c| c.pr_auc),
                cells_used: used.len(),
                cells_degenerate: cells.iter().filter(|c| c.n_images == n && c.degenerate).count(),
            }
        })
        .collect();
    Ok(SweepReport {
        seed: base.seed,
        cells,
        summaries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionReport {
    pub rmse: f64,
    pub r2: f64,
    pub pearson_r: f64,
    pub n_folds: usize,
    pub truth: Vec<f64>,
    pub predicted: Vec<f64>,
}

/// RMSE, R² and Pearson r of predictions against targets.
pub fn regression_metrics(truth: &[f64], predicted: &[f64]) -> (f64, f64, f64) {
    let n = truth.len() as f64;
    let sse: f64 = truth.iter().zip(predicted).map(|(t, p)| (t - p).powi(2)).sum();
    let m = mean(truth);
    let sst: f64 = truth.iter().map(|t| (t - m).powi(2)).sum();
    let rmse = (sse / n).sqrt();
    let r2 = if sst == 0.0 { f64::NAN } else { 1.0 - sse / sst };
    (rmse, r2, pearson(truth, predicted))
}

/// Leave-one-leaflet-out regression of NND on nitrate, resolution and
/// exposure time. Inputs and target are standardized on each training fold
/// and predictions mapped back to millimetres.
pub fn loocv_regress(ds: &Dataset, params: &GbdtParams) -> Result<RegressionReport, MlError> {
    let groups: Vec<Vec<usize>> = ds.leaflet_groups().into_values().collect();
    if groups.len() < MIN_GROUPS {
        return Err(MlError::InsufficientGroups(groups.len()));
    }
    let folds: Vec<Result<Vec<(usize, f64)>, MlError>> = groups
        .par_iter()
        .map(|test_idx| {
            let train_idx: Vec<usize> = (0..ds.len()).filter(|i| !test_idx.contains(i)).collect();
            let x: Vec<Vec<f64>> = train_idx
                .iter()
                .map(|&i| ds.records[i].regressor_features().to_vec())
                .collect();
            let y: Vec<Vec<f64>> = train_idx.iter().map(|&i| vec![ds.records[i].nnd]).collect();
            let xs = fit_scaler(&x, &REGRESSOR_FEATURES)?;
            let ys = fit_scaler(&y, &["nnd_mm"])?;
            let yt: Vec<f64> = ys.transform(&y).into_iter().map(|r| r[0]).collect();
            let model = gbdt_train(&xs.transform(&x), &yt, Objective::L2, params)?;
            Ok(test_idx
                .iter()
                .map(|&i| {
                    let r = xs.transform_row(&ds.records[i].regressor_features());
                    (i, ys.inverse(0, model.margin(&r)))
                })
                .collect())
        })
        .collect();
    let mut pairs = Vec::with_capacity(ds.len());
    for f in folds {
        pairs.extend(f?);
    }
    pairs.sort_by_key(|p| p.0);
    let truth: Vec<f64> = pairs.iter().map(|&(i, _)| ds.records[i].nnd).collect();
    let predicted: Vec<f64> = pairs.iter().map(|&(_, p)| p).collect();
    let (rmse, r2, pearson_r) = regression_metrics(&truth, &predicted);
    Ok(RegressionReport {
        rmse,
        r2,
        pearson_r,
        n_folds: groups.len(),
        truth,
        predicted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::SampleRecord;
    use crate::stats::std_population;

    fn record(leaf: usize, img: usize, nnd: f64, nitrate: f64) -> SampleRecord {
        SampleRecord {
            plant_id: "p".into(),
            compound_leaf_id: format!("c{leaf:02}"),
            leaflet_id: format!("l{}", img % 3),
            nnd,
            resolution: 8e6 + ((leaf * 7 + img * 3) % 11) as f64 * 1e5,
            exposure_time: 0.01 + ((leaf + img * 5) % 7) as f64 * 1e-3,
            iso: 100.0,
            nitrate_ppm: nitrate,
            fertilizer_level: None,
        }
    }

    #[test]
    fn label_rule_is_literal() {
        assert_eq!(LabelRule::AboveIsPositive.label(1599.0, 1600.0), 0);
        assert_eq!(LabelRule::AboveIsPositive.label(1600.0, 1600.0), 1);
        assert_eq!(LabelRule::BelowIsPositive.label(1599.0, 1600.0), 1);
    }

    #[test]
    fn two_leaves_are_insufficient() {
        let ds = Dataset::new(
            (0..40)
                .map(|i| record(i % 2, i, 0.5, 1500.0 + (i % 2) as f64 * 400.0))
                .collect(),
        );
        assert_eq!(
            loocv_classify(&ds, &ClassifyConfig::new(1700.0, 5, 0)).unwrap_err(),
            MlError::InsufficientGroups(2)
        );
    }

    #[test]
    fn constant_mean_rmse_is_std() {
        let t = [1.0, 2.0, 4.0, 9.0];
        let m = mean(&t);
        let (rmse, r2, _) = regression_metrics(&t, &[m; 4]);
        assert!((rmse - std_population(&t)).abs() < 1e-12);
        assert!(r2.abs() < 1e-12);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(1600.0, 1900.0, 10);
        assert_eq!(v.len(), 10);
        assert_eq!(v[0], 1600.0);
        assert_eq!(v[9], 1900.0);
    }
}

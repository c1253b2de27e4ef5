use std::fs::File;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use trichome_core::ml::{
    equal_interval_thresholds, linspace, loocv_classify, loocv_regress, sweep, ClassifyConfig, Dataset, GbdtParams,
    LabelRule,
};
use trichome_core::stats::quantile;

use crate::config::{fill, out_dir};
use crate::error::{input, CliResult};
use crate::report::{ensure_dir, envelope, opt, to_json, write_csv, write_text};
use crate::Global;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Classify,
    Regress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleArg {
    /// Positive when nitrate is at or above the threshold.
    Above,
    /// Positive when nitrate is below the threshold.
    Below,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Nitrate threshold in ppm; defaults to the --threshold-quantile of the data.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Quantile of observed nitrate used when no threshold is given (default 0.75).
    #[arg(long)]
    pub threshold_quantile: Option<f64>,
    /// Images drawn per held-out leaf (default 25).
    #[arg(long)]
    pub n_images: Option<usize>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    /// Mean |SHAP| per feature over held-out draws.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub shap: Option<bool>,
    /// Per-round training loss and PR-AUC of a model fit on all rows.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub learning_curve: Option<bool>,
    /// Output directory (default: current directory).
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl TrainArgs {
    pub fn merged(mut self, file: &TrainArgs) -> Self {
        fill!(self, file; data, mode, threshold, threshold_quantile, n_images, rule, shap, learning_curve, out);
        self
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Explicit thresholds, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    /// Lower end of an evenly spaced threshold grid.
    #[arg(long)]
    pub lo: Option<f64>,
    /// Upper end of an evenly spaced threshold grid.
    #[arg(long)]
    pub hi: Option<f64>,
    /// Number of thresholds (default 10). Without --lo/--hi they are the
    /// midpoints of equal intervals over the observed nitrate range.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Images per held-out leaf, comma separated (default 25).
    #[arg(long, value_delimiter = ',')]
    pub n_images: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    /// Output directory (default: current directory).
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl SweepArgs {
    pub fn merged(mut self, file: &SweepArgs) -> Self {
        fill!(self, file; data, thresholds, lo, hi, steps, n_images, rule, out);
        self
    }
}

pub fn load_dataset(path: Option<&Path>) -> CliResult<Dataset> {
    let path = path.ok_or_else(|| input("--data is required"))?;
    let f = File::open(path).map_err(|e| input(format!("cannot read {}: {e}", path.display())))?;
    Dataset::read_csv(f).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn rule(r: Option<RuleArg>) -> LabelRule {
    match r {
        Some(RuleArg::Below) => LabelRule::BelowIsPositive,
        _ => LabelRule::AboveIsPositive,
    }
}

pub fn run_train(args: TrainArgs, global: &Global) -> CliResult<()> {
    let ds = load_dataset(args.data.as_deref())?;
    let dir = out_dir(&args.out);
    ensure_dir(&dir)?;
    match args.mode.unwrap_or(Mode::Classify) {
        Mode::Classify => classify(&ds, &args, global, &dir),
        Mode::Regress => regress(&ds, &args, global, &dir),
    }
}

fn classify(ds: &Dataset, args: &TrainArgs, global: &Global, dir: &Path) -> CliResult<()> {
    let threshold = match args.threshold {
        Some(t) => t,
        None => {
            let q = args.threshold_quantile.unwrap_or(0.75);
            if !(0.0..=1.0).contains(&q) {
                return Err(input(format!("threshold quantile must lie in [0, 1], got {q}")));
            }
            let nitrate: Vec<f64> = ds.records.iter().map(|r| r.nitrate_ppm).collect();
            quantile(&nitrate, q)
        }
    };
    let mut cfg = ClassifyConfig::new(threshold, args.n_images.unwrap_or(25), global.seed);
    cfg.rule = rule(args.rule);
    cfg.shap = args.shap.unwrap_or(false);
    cfg.learning_curve = args.learning_curve.unwrap_or(false);
    let r = loocv_classify(ds, &cfg).map_err(input)?;

    let c = r.metrics.confusion;
    write_csv(
        dir,
        "confusion.csv",
        &["truth", "predicted", "count"],
        [(0, 0), (0, 1), (1, 0), (1, 1)].map(|(t, p)| vec![t.to_string(), p.to_string(), c[t][p].to_string()]),
    )?;
    write_csv(
        dir,
        "roc.csv",
        &["fpr", "tpr"],
        r.roc.iter().map(|&(a, b)| vec![a.to_string(), b.to_string()]),
    )?;
    write_csv(
        dir,
        "pr.csv",
        &["recall", "precision"],
        r.pr.iter().map(|&(a, b)| vec![a.to_string(), b.to_string()]),
    )?;
    write_csv(
        dir,
        "folds.csv",
        &[
            "leaf",
            "truth",
            "score",
            "predicted",
            "available_images",
            "with_replacement",
            "smote_applied",
        ],
        r.folds.iter().map(|f| {
            vec![
                f.leaf.clone(),
                f.truth.to_string(),
                f.score.to_string(),
                f.predicted.to_string(),
                f.available_images.to_string(),
                f.with_replacement.to_string(),
                f.smote_applied.to_string(),
            ]
        }),
    )?;
    if let Some(shap) = &r.shap_mean_abs {
        write_csv(
            dir,
            "shap.csv",
            &["feature", "mean_abs_shap"],
            shap.iter().map(|(f, v)| vec![f.clone(), v.to_string()]),
        )?;
    }
    if let Some(curve) = &r.learning_curve {
        write_csv(
            dir,
            "learning_curve.csv",
            &["round", "train_loss", "train_pr_auc"],
            curve
                .iter()
                .map(|p| vec![p.round.to_string(), p.train_loss.to_string(), opt(p.train_pr_auc)]),
        )?;
    }
    let result = serde_json::json!({
        "mode": "classify",
        "threshold_ppm": r.threshold_ppm,
        "n_images": r.n_images,
        "rule": cfg.rule,
        "params": cfg.params,
        "folds": r.folds.len(),
        "skipped": r.skipped,
        "metrics": r.metrics,
        "shap_mean_abs": r.shap_mean_abs,
    });
    let json = to_json(&envelope("train-eval", global.seed, args, result));
    write_text(dir, "metrics.json", &json)?;
    print!("{json}");
    Ok(())
}

fn regress(ds: &Dataset, args: &TrainArgs, global: &Global, dir: &Path) -> CliResult<()> {
    let params = GbdtParams::default();
    let r = loocv_regress(ds, &params).map_err(input)?;
    write_csv(
        dir,
        "predictions.csv",
        &["truth_nnd_mm", "predicted_nnd_mm"],
        r.truth
            .iter()
            .zip(&r.predicted)
            .map(|(t, p)| vec![t.to_string(), p.to_string()]),
    )?;
    let result = serde_json::json!({
        "mode": "regress",
        "params": params,
        "n_folds": r.n_folds,
        "rmse": r.rmse,
        "r2": r.r2,
        "pearson_r": r.pearson_r,
    });
    let json = to_json(&envelope("train-eval", global.seed, args, result));
    write_text(dir, "regression.json", &json)?;
    print!("{json}");
    Ok(())
}

pub fn run_sweep(args: SweepArgs, global: &Global) -> CliResult<()> {
    let ds = load_dataset(args.data.as_deref())?;
    let steps = args.steps.unwrap_or(10);
    let thresholds = match (&args.thresholds, args.lo, args.hi) {
        (Some(t), _, _) => t.clone(),
        (None, Some(lo), Some(hi)) => linspace(lo, hi, steps),
        (None, None, None) => equal_interval_thresholds(&ds, steps),
        _ => return Err(input("--lo and --hi must be given together")),
    };
    if thresholds.is_empty() {
        return Err(input("no thresholds to sweep"));
    }
    let n_images = args.n_images.clone().unwrap_or_else(|| vec![25]);
    let mut base = ClassifyConfig::new(thresholds[0], n_images[0], global.seed);
    base.rule = rule(args.rule);
    let r = sweep(&ds, &thresholds, &n_images, &base).map_err(input)?;

    let dir = out_dir(&args.out);
    ensure_dir(&dir)?;
    write_csv(
        &dir,
        "sweep_cells.csv",
        &[
            "threshold_ppm",
            "n_images",
            "roc_auc",
            "pr_auc",
            "f1",
            "degenerate",
            "skipped_folds",
        ],
        r.cells.iter().map(|c| {
            vec![
                c.threshold_ppm.to_string(),
                c.n_images.to_string(),
                opt(c.roc_auc),
                opt(c.pr_auc),
                opt(c.f1),
                c.degenerate.to_string(),
                c.skipped_folds.to_string(),
            ]
        }),
    )?;
    let result = serde_json::json!({
        "thresholds": thresholds,
        "summaries": r.summaries,
        "cells": r.cells,
    });
    let json = to_json(&envelope("sweep", global.seed, &args, result));
    write_text(&dir, "sweep.json", &json)?;
    print!("{json}");
    Ok(())
}

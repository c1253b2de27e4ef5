use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::points::{poisson_points, simulate_damage_at, Rect, DAMAGE_CUT_X};
use super::SynthError;
use crate::density::mean_nnd;
use crate::seed::derive_seed;
use crate::stats::{median, wilcoxon_signed_rank_with, Alternative, StatsError};

pub const MIN_REPLICATES: usize = 20;
/// Side of the simulated square field.
pub const FIELD_SIDE: f64 = 1000.0;
pub const DEFAULT_LAMBDA: f64 = 1000.0;
pub const DEFAULT_REPLICATES: usize = 200;

const REPLICATE_STREAM: u64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub lambda: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Apply the half-plane damage; off gives the zero-damage control.
    pub damage: bool,
}

impl StudyConfig {
    pub fn new(lambda: f64, replicates: usize, seed: u64) -> Self {
        Self {
            lambda,
            replicates,
            seed,
            damage: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub replicate: usize,
    pub n_before: usize,
    pub n_after: usize,
    pub nnd_before: f64,
    pub nnd_after: f64,
    pub rate_count: f64,
    pub rate_nnd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    pub lambda: f64,
    pub replicates: usize,
    pub seed: u64,
    pub damage: bool,
    pub used: usize,
    /// Replicates with fewer than two points before or after damage.
    pub dropped: usize,
    pub median_rate_count: f64,
    pub median_rate_nnd: f64,
    /// Two-sided signed-rank statistic on `rate_count - rate_nnd`.
    pub wilcoxon_w: f64,
    pub p_value: f64,
    /// One-sided p for count rates exceeding NND rates.
    pub p_value_greater: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub summary: StudySummary,
    pub rows: Vec<StudyRow>,
}

pub const STUDY_COLUMNS: [&str; 7] = [
    "replicate",
    "n_before",
    "n_after",
    "nnd_before",
    "nnd_after",
    "rate_count",
    "rate_nnd",
];

impl StudyReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), SynthError> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| SynthError::Io(e.to_string());
        w.write_record(STUDY_COLUMNS).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.replicate.to_string(),
                r.n_before.to_string(),
                r.n_after.to_string(),
                r.nnd_before.to_string(),
                r.nnd_after.to_string(),
                r.rate_count.to_string(),
                r.rate_nnd.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| SynthError::Io(e.to_string()))
    }
}

fn signed_rank(diffs: &[f64], alt: Alternative) -> Result<(f64, f64), SynthError> {
    match wilcoxon_signed_rank_with(diffs, alt) {
        Ok(t) => Ok((t.statistic, t.p_value)),
        // no non-zero difference at all: nothing to reject
        Err(StatsError::DegeneratePairing) => Ok((0.0, 1.0)),
        Err(e) => Err(e.into()),
    }
}

/// Robustness simulation: NND against raw count under half-plane loss.
pub fn appendix_study(lambda: f64, replicates: usize, seed: u64) -> Result<StudyReport, SynthError> {
    appendix_study_with(&StudyConfig::new(lambda, replicates, seed))
}

pub fn appendix_study_with(cfg: &StudyConfig) -> Result<StudyReport, SynthError> {
    if cfg.replicates < MIN_REPLICATES {
        return Err(SynthError::TooFewReplicates(cfg.replicates));
    }
    let region = Rect::square(FIELD_SIDE);
    let rows: Vec<Result<Option<StudyRow>, SynthError>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let before = poisson_points(cfg.lambda, region, derive_seed(cfg.seed, REPLICATE_STREAM, r as u64))?;
            let after = if cfg.damage {
                simulate_damage_at(&before, DAMAGE_CUT_X)
            } else {
                before.clone()
            };
            let (Ok(nnd_before), Ok(nnd_after)) = (mean_nnd(&before), mean_nnd(&after)) else {
                return Ok(None);
            };
            let n_before = before.len();
            let n_after = after.len();
            Ok(Some(StudyRow {
                replicate: r,
                n_before,
                n_after,
                nnd_before,
                nnd_after,
                rate_count: (n_before as f64 - n_after as f64).abs() / n_before as f64,
                rate_nnd: (nnd_before - nnd_after).abs() / nnd_before,
            }))
        })
        .collect();
    let mut kept = Vec::with_capacity(cfg.replicates);
    for r in rows {
        if let Some(row) = r? {
            kept.push(row);
        }
    }
    let dropped = cfg.replicates - kept.len();
    let rc: Vec<f64> = kept.iter().map(|r| r.rate_count).collect();
    let rn: Vec<f64> = kept.iter().map(|r| r.rate_nnd).collect();
    let diffs: Vec<f64> = rc.iter().zip(&rn).map(|(a, b)| a - b).collect();
    let (w, p) = signed_rank(&diffs, Alternative::TwoSided)?;
    let (_, p_greater) = signed_rank(&diffs, Alternative::Greater)?;
    Ok(StudyReport {
        summary: StudySummary {
            lambda: cfg.lambda,
            replicates: cfg.replicates,
            seed: cfg.seed,
            damage: cfg.damage,
            used: kept.len(),
            dropped,
            median_rate_count: median(&rc),
            median_rate_nnd: median(&rn),
            wilcoxon_w: w,
            p_value: p,
            p_value_greater: p_greater,
        },
        rows: kept,
    })
}

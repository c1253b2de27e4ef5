use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use trichome_core::ml::Dataset;
use trichome_core::stats::{kruskal_wallis, mann_whitney_bonferroni, stratified_ols, vif, TestResult, DEFAULT_CUTS};

use crate::config::{fill, out_dir};
use crate::error::{input, CliResult};
use crate::report::{ensure_dir, envelope, to_json, write_text};
use crate::train::load_dataset;
use crate::Global;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Report only the VIF table without ISO.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub exclude_iso: Option<bool>,
    /// Lower resolution percentile for the stratified fits (default 0.15).
    #[arg(long)]
    pub cut_low: Option<f64>,
    /// Upper resolution percentile for the stratified fits (default 0.85).
    #[arg(long)]
    pub cut_high: Option<f64>,
    /// Output directory (default: current directory).
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl StatsArgs {
    pub fn merged(mut self, file: &StatsArgs) -> Self {
        fill!(self, file; data, exclude_iso, cut_low, cut_high, out);
        self
    }
}

#[derive(Debug, Serialize)]
struct GroupTest {
    variable: &'static str,
    groups: Vec<String>,
    kruskal_wallis: TestResult,
    /// Pairwise Mann-Whitney with Bonferroni-adjusted p, in `pairs` order.
    pairwise: Vec<serde_json::Value>,
}

fn group_tests(ds: &Dataset) -> CliResult<Vec<GroupTest>> {
    let mut by_level: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in ds.records.iter().enumerate() {
        if let Some(level) = &r.fertilizer_level {
            by_level.entry(level).or_default().push(i);
        }
    }
    let names: Vec<String> = by_level.keys().map(|s| s.to_string()).collect();
    let variables: [(&'static str, fn(&trichome_core::ml::SampleRecord) -> f64); 2] =
        [("nitrate_ppm", |r| r.nitrate_ppm), ("nnd_mm", |r| r.nnd)];
    let mut out = Vec::new();
    for (variable, get) in variables {
        let groups: Vec<Vec<f64>> = by_level
            .values()
            .map(|idx| idx.iter().map(|&i| get(&ds.records[i])).collect())
            .collect();
        let kw = kruskal_wallis(&groups).map_err(|e| input(format!("{variable}: {e}")))?;
        let mut pairs = Vec::new();
        let mut labels = Vec::new();
        for a in 0..groups.len() {
            for b in a + 1..groups.len() {
                pairs.push((groups[a].clone(), groups[b].clone()));
                labels.push((names[a].clone(), names[b].clone()));
            }
        }
        let pw = mann_whitney_bonferroni(&pairs).map_err(|e| input(format!("{variable}: {e}")))?;
        let pairwise = labels
            .into_iter()
            .zip(pw)
            .map(|((a, b), r)| serde_json::json!({ "a": a, "b": b, "u": r.test.statistic, "p": r.test.p_value, "p_adjusted": r.p_adjusted }))
            .collect();
        out.push(GroupTest {
            variable,
            groups: names.clone(),
            kruskal_wallis: kw,
            pairwise,
        });
    }
    Ok(out)
}

pub fn run(args: StatsArgs, global: &Global) -> CliResult<()> {
    let ds = load_dataset(args.data.as_deref())?;
    let mut notices = Vec::new();
    let groups = if ds.has_fertilizer_levels() {
        Some(group_tests(&ds)?)
    } else {
        notices.push("no fertilizer_level column: group tests skipped".to_string());
        None
    };

    let full: Vec<Vec<f64>> = ds
        .records
        .iter()
        .map(|r| vec![r.nnd, r.resolution, r.exposure_time, r.iso])
        .collect();
    let names = ["nnd_mm", "resolution_px", "exposure_time_s", "iso"];
    let mut vif_tables = Vec::new();
    if !args.exclude_iso.unwrap_or(false) {
        vif_tables.push(serde_json::json!({ "features": names, "entries": vif(&full, &names).map_err(input)? }));
    }
    let without: Vec<Vec<f64>> = full.iter().map(|r| r[..3].to_vec()).collect();
    vif_tables
        .push(serde_json::json!({ "features": &names[..3], "entries": vif(&without, &names[..3]).map_err(input)? }));

    let cuts = (
        args.cut_low.unwrap_or(DEFAULT_CUTS.0),
        args.cut_high.unwrap_or(DEFAULT_CUTS.1),
    );
    let strata = stratified_ols(&ds, cuts).map_err(input)?;

    let result = serde_json::json!({
        "rows": ds.len(),
        "group_tests": groups,
        "vif": vif_tables,
        "stratified_ols": { "stratify_by": "resolution_px", "x": "nitrate_ppm", "y": "nnd_mm", "cuts": cuts, "strata": strata },
        "notices": notices,
    });
    for n in &notices {
        eprintln!("notice: {n}");
    }
    let json = to_json(&envelope("stats", global.seed, &args, result));
    if args.out.is_some() {
        let dir = out_dir(&args.out);
        ensure_dir(&dir)?;
        write_text(&dir, "stats.json", &json)?;
    }
    print!("{json}");
    Ok(())
}

use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use trichome_core::synth::{appendix_study_with, StudyConfig, DEFAULT_LAMBDA, DEFAULT_REPLICATES};

use crate::config::{fill, out_dir};
use crate::error::{input, internal, CliResult};
use crate::report::{ensure_dir, envelope, to_json, write_text};
use crate::Global;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppendixArgs {
    /// Expected points per field (default 1000).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of simulated fields, at least 20 (default 200).
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Skip the damage step (zero-damage control).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_damage: Option<bool>,
    /// Output directory (default: current directory).
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl AppendixArgs {
    pub fn merged(mut self, file: &AppendixArgs) -> Self {
        fill!(self, file; lambda, replicates, no_damage, out);
        self
    }
}

pub fn run(args: AppendixArgs, global: &Global) -> CliResult<()> {
    let mut cfg = StudyConfig::new(
        args.lambda.unwrap_or(DEFAULT_LAMBDA),
        args.replicates.unwrap_or(DEFAULT_REPLICATES),
        global.seed,
    );
    cfg.damage = !args.no_damage.unwrap_or(false);
    let report = appendix_study_with(&cfg).map_err(input)?;
    let dir = out_dir(&args.out);
    ensure_dir(&dir)?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(internal)?;
    write_text(&dir, "appendix.csv", &String::from_utf8(csv).map_err(internal)?)?;
    let json = to_json(&envelope("appendix", global.seed, &args, &report.summary));
    write_text(&dir, "appendix.json", &json)?;
    print!("{json}");
    Ok(())
}

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analyze::AnalyzeArgs;
use crate::appendix::AppendixArgs;
use crate::error::{input, CliResult};
use crate::stats::StatsArgs;
use crate::synth::SynthArgs;
use crate::train::{SweepArgs, TrainArgs};

/// Settings read from `--config`. Each section mirrors the flags of one
/// subcommand; a flag given on the command line replaces the file value.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub analyze: AnalyzeArgs,
    pub synth: SynthArgs,
    pub train_eval: TrainArgs,
    pub sweep: SweepArgs,
    pub appendix: AppendixArgs,
    pub stats: StatsArgs,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            fs::read_to_string(path).map_err(|e| input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| input(format!("invalid config {}: {e}", path.display())))
    }
}

/// Fills every `None` field of `$flags` from `$file`.
macro_rules! fill {
    ($flags:expr, $file:expr; $($field:ident),+ $(,)?) => {
        $(
            if $flags.$field.is_none() {
                $flags.$field = $file.$field.clone();
            }
        )+
    };
}
pub(crate) use fill;

pub fn out_dir(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from("."))
}

mod analyze;
mod appendix;
mod config;
mod error;
mod report;
mod stats;
mod synth;
mod train;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::FileConfig;
use error::{internal, CliResult};

const FILES_HELP: &str = "\
Files:
  scene.pgm          binary 8-bit PGM (P5) photograph
  scene.exif         raw TIFF/EXIF blob next to the image (same stem)
  scene.meta.json    {exposure_time_s, iso, width, height}, used when no .exif exists
  scene.jpg          EXIF is read from its APP1 segment; pixels are not decoded
  dataset CSV        plant_id, compound_leaf_id, leaflet_id, nnd_mm, resolution_px,
                     exposure_time_s, iso, nitrate_ppm [, fertilizer_level]

Exit codes: 0 success, 1 internal error, 2 input or detection error.";

#[derive(Debug, Parser)]
#[command(name = "trichome", version, about = "Trichome density from fiducial photographs, and models built on it", after_help = FILES_HELP)]
struct Cli {
    /// JSON file with per-subcommand defaults; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random stream (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for batch work (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Measure trichome NND on one or more photographs.
    Analyze(analyze::AnalyzeArgs),
    /// Render synthetic ground-truth scenes.
    Synth(synth::SynthArgs),
    /// Leaf-grouped cross-validation of the classifier or the regressor.
    TrainEval(train::TrainArgs),
    /// Classifier over a grid of thresholds and image counts (mROC/mPR).
    Sweep(train::SweepArgs),
    /// NND versus count under half-plane damage.
    Appendix(appendix::AppendixArgs),
    /// Group tests, VIF and stratified regressions on a dataset.
    Stats(stats::StatsArgs),
}

/// Settings shared by all subcommands after merging flags and file.
pub struct Global {
    pub seed: u64,
}

fn run(cli: Cli) -> CliResult<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let global = Global {
        seed: cli.seed.or(file.seed).unwrap_or(0),
    };
    if let Some(jobs) = cli.jobs.or(file.jobs) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(internal)?;
    }
    match cli.command {
        Command::Analyze(a) => analyze::run(a.merged(&file.analyze), &global),
        Command::Synth(a) => synth::run(a.merged(&file.synth), &global),
        Command::TrainEval(a) => train::run_train(a.merged(&file.train_eval), &global),
        Command::Sweep(a) => train::run_sweep(a.merged(&file.sweep), &global),
        Command::Appendix(a) => appendix::run(a.merged(&file.appendix), &global),
        Command::Stats(a) => stats::run(a.merged(&file.stats), &global),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
        Err(_) => ExitCode::from(1),
    }
}

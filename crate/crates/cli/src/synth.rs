use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trichome_core::metadata::encode_pgm;
use trichome_core::seed::derive_seed;
use trichome_core::synth::{render_scene, RenderedScene, SceneParams};

use crate::config::{fill, out_dir};
use crate::error::{input, CliResult};
use crate::report::{ensure_dir, envelope, to_json, write_bytes, write_text};
use crate::Global;

const BATCH_STREAM: u64 = 20;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthArgs {
    /// Expected trichome count in the opening (default 150).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Horizontal camera tilt, degrees.
    #[arg(long, allow_negative_numbers = true)]
    pub tilt_h: Option<f64>,
    /// Vertical camera tilt, degrees.
    #[arg(long, allow_negative_numbers = true)]
    pub tilt_v: Option<f64>,
    /// Camera to paper distance, mm.
    #[arg(long)]
    pub distance: Option<f64>,
    /// Fractional illumination slope across the frame.
    #[arg(long)]
    pub gradient: Option<f64>,
    /// Gaussian noise standard deviation in gray levels.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Side of the square output image, px.
    #[arg(long)]
    pub image_side: Option<usize>,
    /// Focal length, px.
    #[arg(long)]
    pub focal: Option<f64>,
    /// Draw tilt, distance and gradient from the capture envelope.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub envelope: Option<bool>,
    /// Number of scenes; more than one writes numbered files.
    #[arg(long)]
    pub count: Option<usize>,
    /// Output directory (default: current directory).
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl SynthArgs {
    pub fn merged(mut self, file: &SynthArgs) -> Self {
        fill!(self, file; lambda, tilt_h, tilt_v, distance, gradient, noise, image_side, focal, envelope, count, out);
        self
    }

    fn params(&self, seed: u64) -> SceneParams {
        let lambda = self.lambda.unwrap_or(150.0);
        let noise = self.noise.unwrap_or(0.0);
        let mut p = if self.envelope.unwrap_or(false) {
            SceneParams::sample_in_envelope(lambda, noise, seed)
        } else {
            let mut p = SceneParams::new(lambda, seed);
            p.noise_sigma = noise;
            p
        };
        if let Some(v) = self.tilt_h {
            p.tilt_h = v;
        }
        if let Some(v) = self.tilt_v {
            p.tilt_v = v;
        }
        if let Some(v) = self.distance {
            p.distance_mm = v;
        }
        if let Some(v) = self.gradient {
            p.illum_gradient = v;
        }
        if let Some(v) = self.image_side {
            p.image_side = v;
        }
        if let Some(v) = self.focal {
            p.focal_px = v;
        }
        p
    }
}

pub fn run(args: SynthArgs, global: &Global) -> CliResult<()> {
    let count = args.count.unwrap_or(1);
    if count == 0 {
        return Err(input("count must be at least 1"));
    }
    let dir = out_dir(&args.out);
    ensure_dir(&dir)?;
    let seeds: Vec<u64> = if count == 1 {
        vec![global.seed]
    } else {
        (0..count as u64)
            .map(|i| derive_seed(global.seed, BATCH_STREAM, i))
            .collect()
    };
    let scenes: Vec<CliResult<RenderedScene>> = seeds
        .par_iter()
        .map(|&s| render_scene(&args.params(s)).map_err(input))
        .collect();
    let mut summary = Vec::with_capacity(count);
    for (i, scene) in scenes.into_iter().enumerate() {
        let scene = scene?;
        let (pgm, exif, truth) = if count == 1 {
            (
                "scene.pgm".to_string(),
                "scene.exif".to_string(),
                "truth.json".to_string(),
            )
        } else {
            (
                format!("scene_{i:03}.pgm"),
                format!("scene_{i:03}.exif"),
                format!("truth_{i:03}.json"),
            )
        };
        write_bytes(&dir, &pgm, &encode_pgm(&scene.image))?;
        write_bytes(&dir, &exif, &scene.exif)?;
        write_text(
            &dir,
            &truth,
            &to_json(&envelope("synth", global.seed, &args, &scene.truth)),
        )?;
        if scene.truth.merge_warning {
            eprintln!("warning: {pgm}: expected spacing below two blob sigmas, heads will merge");
        }
        summary.push(serde_json::json!({
            "image": pgm,
            "seed": scene.truth.seed,
            "n_points": scene.truth.n_points,
            "true_nnd_mm": scene.truth.true_nnd_mm,
            "merge_warning": scene.truth.merge_warning,
        }));
    }
    print!("{}", to_json(&envelope("synth", global.seed, &args, summary)));
    Ok(())
}

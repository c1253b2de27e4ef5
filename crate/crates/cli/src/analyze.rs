use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use trichome_core::fiducial::PaperLayout;
use trichome_core::imaging::Polarity;
use trichome_core::metadata::{load_capture_meta, load_pgm, MetadataError};
use trichome_core::ml::{FERTILIZER_COLUMN, REQUIRED_COLUMNS};
use trichome_core::pipeline::{analyze_image, AnalyzeConfig};

use crate::config::{fill, out_dir};
use crate::error::{input, internal, CliError, CliResult};
use crate::report::{ensure_dir, envelope, to_json, write_text};
use crate::Global;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolarityArg {
    Bright,
    Dark,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalyzeArgs {
    /// PGM photographs to analyze.
    pub images: Vec<PathBuf>,
    /// Paper layout JSON (paper_side_mm, marker_side_mm, marker_margin_mm, opening_side_mm).
    #[arg(long)]
    pub layout: Option<PathBuf>,
    /// Whether trichomes are brighter or darker than the opening.
    #[arg(long, value_enum)]
    pub polarity: Option<PolarityArg>,
    /// Resolution feature to use instead of the EXIF pixel count.
    #[arg(long)]
    pub resolution_override: Option<f64>,
    /// Append one dataset row per image to this CSV.
    #[arg(long)]
    pub append: Option<PathBuf>,
    #[arg(long)]
    pub plant: Option<String>,
    #[arg(long)]
    pub leaf: Option<String>,
    #[arg(long)]
    pub leaflet: Option<String>,
    /// Leaf nitrate (ppm) written to appended rows.
    #[arg(long)]
    pub nitrate: Option<f64>,
    #[arg(long)]
    pub fertilizer: Option<String>,
    /// Directory for analyze.json.
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl AnalyzeArgs {
    pub fn merged(mut self, file: &AnalyzeArgs) -> Self {
        if self.images.is_empty() {
            self.images = file.images.clone();
        }
        fill!(self, file; layout, polarity, resolution_override, append, plant, leaf, leaflet, nitrate, fertilizer, out);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ImageReport {
    pub image: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nnd_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nnd_px: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opening_px: Option<f64>,
    pub exposure_time: Option<f64>,
    pub iso: Option<u32>,
    pub resolution: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejected_regions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn analyze_one(path: &Path, cfg: &AnalyzeConfig) -> CliResult<ImageReport> {
    let img = load_pgm(path).map_err(input)?;
    let meta = match load_capture_meta(path) {
        Ok(m) => Some(m),
        Err(MetadataError::NoMetadata(_)) => None,
        Err(e) => return Err(input(e)),
    };
    let a = analyze_image(&img, meta.as_ref(), cfg).map_err(input)?;
    Ok(ImageReport {
        image: path.display().to_string(),
        nnd_mm: Some(a.nnd_mm),
        nnd_px: Some(a.nnd_px),
        n_points: Some(a.n_points),
        opening_px: Some(a.opening_px),
        exposure_time: a.exposure_time,
        iso: a.iso,
        resolution: a.resolution,
        rejected_regions: Some(a.rejected_regions),
        error: None,
    })
}

fn append_rows(path: &Path, args: &AnalyzeArgs, reports: &[ImageReport]) -> CliResult<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| input(format!("cannot open {}: {e}", path.display())))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e: csv::Error| internal(format!("cannot append to {}: {e}", path.display()));
    if fresh {
        let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
        header.extend([FERTILIZER_COLUMN, "image"]);
        w.write_record(&header).map_err(err)?;
    }
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in reports.iter().filter(|r| r.error.is_none()) {
        w.write_record([
            args.plant.clone().unwrap_or_default(),
            args.leaf.clone().unwrap_or_default(),
            args.leaflet.clone().unwrap_or_default(),
            num(r.nnd_mm),
            num(r.resolution),
            num(r.exposure_time),
            num(r.iso.map(f64::from)),
            num(args.nitrate),
            args.fertilizer.clone().unwrap_or_default(),
            r.image.clone(),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| internal(format!("cannot append to {}: {e}", path.display())))
}

pub fn run(args: AnalyzeArgs, global: &Global) -> CliResult<()> {
    if args.images.is_empty() {
        return Err(input("no images given"));
    }
    let layout = match &args.layout {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| input(format!("cannot read layout {}: {e}", p.display())))?;
            PaperLayout::from_json(&text).map_err(input)?
        }
        None => PaperLayout::default(),
    };
    let cfg = AnalyzeConfig {
        layout,
        polarity: match args.polarity {
            Some(PolarityArg::Dark) => Polarity::Dark,
            _ => Polarity::Bright,
        },
        resolution_override: args.resolution_override,
    };

    let outcomes: Vec<CliResult<ImageReport>> = args.images.par_iter().map(|p| analyze_one(p, &cfg)).collect();
    let mut reports = Vec::with_capacity(outcomes.len());
    let mut first_error: Option<CliError> = None;
    for (path, o) in args.images.iter().zip(outcomes) {
        match o {
            Ok(r) => reports.push(r),
            Err(e) => {
                reports.push(ImageReport {
                    image: path.display().to_string(),
                    nnd_mm: None,
                    nnd_px: None,
                    n_points: None,
                    opening_px: None,
                    exposure_time: None,
                    iso: None,
                    resolution: None,
                    rejected_regions: None,
                    error: Some(e.to_string()),
                });
                first_error.get_or_insert(e);
            }
        }
    }

    if let Some(path) = &args.append {
        append_rows(path, &args, &reports)?;
    }
    let json = to_json(&envelope("analyze", global.seed, &args, &reports));
    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        write_text(&out_dir(&args.out), "analyze.json", &json)?;
    }
    print!("{json}");
    match first_error {
        Some(e) if args.images.len() == 1 => Err(e),
        Some(e) => Err(CliError::Input(format!(
            "{} of {} images failed; first: {e}",
            reports.iter().filter(|r| r.error.is_some()).count(),
            reports.len()
        ))),
        None => Ok(()),
    }
}

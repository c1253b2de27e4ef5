//! Photograph to NND: threshold, markers, rectification, illumination
//! correction, segmentation, shape filtering and nearest-neighbor distance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{mean_nnd, to_physical, DensityError};
use crate::fiducial::{
    default_dictionary, detect_markers, otsu_threshold, rectify, refine_corners_gray, FiducialError, MarkerDetection,
    PaperLayout,
};
use crate::image::{GrayImage, ImageError};
use crate::imaging::{
    extract_and_filter, flat_field_correct, morph_open, segment_watershed, FilterError, Polarity, CORRECTED_SIDE,
};
use crate::metadata::CaptureMeta;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Fiducial(#[from] FiducialError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Density(#[from] DensityError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeConfig {
    pub layout: PaperLayout,
    pub polarity: Polarity,
    /// Replaces the EXIF pixel count as the resolution feature.
    pub resolution_override: Option<f64>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            layout: PaperLayout::default(),
            polarity: Polarity::Bright,
            resolution_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub nnd_mm: f64,
    /// NND in rectified canvas pixels.
    pub nnd_px: f64,
    pub n_points: usize,
    pub opening_px: f64,
    pub exposure_time: Option<f64>,
    pub iso: Option<u32>,
    pub resolution: Option<f64>,
    pub rejected_regions: usize,
    pub markers: Vec<MarkerDetection>,
    /// Accepted trichome centroids in paper millimetres.
    pub points_mm: Vec<(f64, f64)>,
}

/// Runs the whole measurement on one grayscale photograph.
pub fn analyze_image(
    img: &GrayImage,
    meta: Option<&CaptureMeta>,
    cfg: &AnalyzeConfig,
) -> Result<Analysis, PipelineError> {
    let layout = &cfg.layout;
    layout.validate()?;
    let (_, binary) = otsu_threshold(img);
    let markers: Vec<MarkerDetection> = detect_markers(&binary, default_dictionary())
        .iter()
        .map(|m| refine_corners_gray(img, m))
        .collect();
    let rect = rectify(img, &markers, layout)?;
    let (start, side) = rect.opening_window(layout);
    let opening = rect.image.crop(start, start, side, side)?;

    let corrected = flat_field_correct(&opening);
    let (_, mut fg) = otsu_threshold(&corrected);
    if cfg.polarity == Polarity::Dark {
        fg = fg.map(|v| 255.0 - v);
    }
    let cleaned = morph_open(&fg);
    let regions = segment_watershed(&cleaned);
    let mm_per_px = layout.opening_side_mm / CORRECTED_SIDE as f64;
    let set = extract_and_filter(&regions, cleaned.dimensions(), mm_per_px)?;

    let nnd_analysis = mean_nnd(&set.points)?;
    let nnd_canvas = nnd_analysis * side as f64 / CORRECTED_SIDE as f64;
    let density = to_physical(nnd_canvas, set.points.len(), rect.opening_px, layout.opening_side_mm)?;
    let origin = layout.opening_origin_mm();
    let points_mm = set
        .points
        .iter()
        .map(|&(x, y)| (origin + (x + 0.5) * mm_per_px, origin + (y + 0.5) * mm_per_px))
        .collect();
    Ok(Analysis {
        nnd_mm: density.nnd_mm,
        nnd_px: density.nnd_px,
        n_points: density.n_points,
        opening_px: rect.opening_px,
        exposure_time: meta.map(|m| m.exposure_time),
        iso: meta.map(|m| m.iso),
        resolution: cfg.resolution_override.or(meta.map(|m| m.resolution())),
        rejected_regions: set.rejected,
        markers,
        points_mm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{render_scene, SceneParams};

    #[test]
    fn blank_image_reports_marker_zero() {
        let img = GrayImage::filled(200, 200, 128.0).unwrap();
        let e = analyze_image(&img, None, &AnalyzeConfig::default()).unwrap_err();
        assert_eq!(e.to_string(), "marker 0 not found");
    }

    #[test]
    fn recovers_clean_scene() {
        let mut p = SceneParams::new(150.0, 11);
        p.image_side = 2000;
        p.focal_px = 8000.0;
        let s = render_scene(&p).unwrap();
        let a = analyze_image(&s.image, None, &AnalyzeConfig::default()).unwrap();
        let truth = s.truth.true_nnd_mm.unwrap();
        let rel = (a.nnd_mm - truth).abs() / truth;
        assert!(rel < 0.02, "nnd {} vs {} ({rel})", a.nnd_mm, truth);
        assert!(a.n_points <= s.truth.n_points && a.n_points * 20 >= s.truth.n_points * 19);
        assert_eq!(a.opening_px, 600.0);
    }
}

//! Square fiducial markers: dictionary, detection, homography and
//! rectification of the measurement paper.

mod detect;
mod dictionary;
mod homography;
mod rectify;
mod threshold;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use detect::{detect_markers, refine_corners_gray, MarkerDetection};
pub use dictionary::{
    code_bit, generate_dictionary, rotate_cw, rotational_distance, MarkerDictionary, DICTIONARY_SIZE, MARKER_GRID,
    MIN_DISTANCE,
};
pub(crate) use homography::matmul;
pub use homography::{estimate_homography, max_reprojection_error, Homography};
pub use rectify::{canvas_to_mm, mm_to_canvas, rectify, Rectified, CANVAS_SIDE};
pub use threshold::otsu_threshold;

/// Seed of the dictionary printed on the measurement paper.
pub const DEFAULT_DICTIONARY_SEED: u64 = 0;

/// The dictionary for [`DEFAULT_DICTIONARY_SEED`], built once.
pub fn default_dictionary() -> &'static MarkerDictionary {
    static DICT: std::sync::OnceLock<MarkerDictionary> = std::sync::OnceLock::new();
    DICT.get_or_init(|| generate_dictionary(DEFAULT_DICTIONARY_SEED).expect("default seed yields a full dictionary"))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FiducialError {
    #[error("marker {0} not found")]
    MarkerNotFound(usize),
    #[error("marker {0} detected more than once")]
    DuplicateMarker(usize),
    #[error("dictionary generation stopped with {found} codes after {attempts} candidates")]
    DictionaryExhausted { found: usize, attempts: usize },
    #[error("degenerate point configuration for homography")]
    DegenerateHomography,
    #[error("homography needs at least 4 correspondences, got {0}")]
    TooFewCorrespondences(usize),
    #[error("correspondence count mismatch: {src} source vs {dst} destination points")]
    CorrespondenceMismatch { src: usize, dst: usize },
    #[error("invalid paper layout: {0}")]
    InvalidLayout(String),
}

/// Physical geometry of the measurement paper, in millimetres.
///
/// Markers 0..=3 sit in the top-left, top-right, bottom-right and bottom-left
/// corners, each `marker_margin_mm` from the paper edges and upright. The
/// opening is a centered square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaperLayout {
    pub paper_side_mm: f64,
    pub marker_side_mm: f64,
    pub marker_margin_mm: f64,
    pub opening_side_mm: f64,
}

impl Default for PaperLayout {
    fn default() -> Self {
        Self {
            paper_side_mm: 20.0,
            marker_side_mm: 3.0,
            marker_margin_mm: 0.5,
            opening_side_mm: 12.0,
        }
    }
}

impl PaperLayout {
    pub fn validate(&self) -> Result<(), FiducialError> {
        let fields = [
            ("paper_side_mm", self.paper_side_mm),
            ("marker_side_mm", self.marker_side_mm),
            ("opening_side_mm", self.opening_side_mm),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(FiducialError::InvalidLayout(format!("{name} must be positive")));
            }
        }
        if !(self.marker_margin_mm.is_finite() && self.marker_margin_mm > 0.0) {
            return Err(FiducialError::InvalidLayout("marker_margin_mm must be positive".into()));
        }
        if self.marker_margin_mm + self.marker_side_mm > self.opening_origin_mm() {
            return Err(FiducialError::InvalidLayout("markers overlap the opening".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, FiducialError> {
        let layout: Self = serde_json::from_str(text).map_err(|e| FiducialError::InvalidLayout(e.to_string()))?;
        layout.validate()?;
        Ok(layout)
    }

    /// Offset of the opening's top-left corner from the paper's.
    pub fn opening_origin_mm(&self) -> f64 {
        (self.paper_side_mm - self.opening_side_mm) / 2.0
    }

    /// Top-left corner of marker `id` on the paper.
    pub fn marker_origin_mm(&self, id: usize) -> Option<(f64, f64)> {
        let near = self.marker_margin_mm;
        let far = self.paper_side_mm - self.marker_margin_mm - self.marker_side_mm;
        match id {
            0 => Some((near, near)),
            1 => Some((far, near)),
            2 => Some((far, far)),
            3 => Some((near, far)),
            _ => None,
        }
    }

    /// Corners of marker `id` in canonical order (top-left, top-right,
    /// bottom-right, bottom-left).
    pub fn marker_corners_mm(&self, id: usize) -> Option<[(f64, f64); 4]> {
        let (x, y) = self.marker_origin_mm(id)?;
        let s = self.marker_side_mm;
        Some([(x, y), (x + s, y), (x + s, y + s), (x, y + s)])
    }

    /// Whether a paper point lies inside the opening.
    pub fn in_opening(&self, x: f64, y: f64) -> bool {
        let lo = self.opening_origin_mm();
        let hi = lo + self.opening_side_mm;
        x >= lo && x < hi && y >= lo && y < hi
    }
}

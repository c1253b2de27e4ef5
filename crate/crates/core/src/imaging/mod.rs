//! Illumination correction, binary clean-up, watershed segmentation and
//! shape filtering of the rectified opening.

mod filter;
mod flat_field;
mod morphology;
mod watershed;

pub use filter::{
    contour_stats, extract_and_filter, ContourStats, Fences, FilterError, TrichomeSet, FENCE_K, MIN_DIAMETER_MM,
};
pub use flat_field::{flat_field_correct, flat_field_correct_with, BLUR_WINDOW, CORRECTED_SIDE};
pub use morphology::{dilate3, erode3, morph_open};
pub use watershed::{chebyshev_distance, segment_watershed, Region};

use serde::{Deserialize, Serialize};

/// Which side of the Otsu threshold counts as trichome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    /// Trichomes are brighter than the opening (the default).
    #[default]
    Bright,
    Dark,
}

//! Trichome density measurement from photographs of a fiducial measurement
//! paper, plus the statistics and boosted-tree models built on top of it.

pub mod contour;
pub mod density;
pub mod fiducial;
pub mod image;
pub mod imaging;
pub mod linalg;
pub mod metadata;
pub mod ml;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod synth;

pub use image::{GrayImage, ImageError};

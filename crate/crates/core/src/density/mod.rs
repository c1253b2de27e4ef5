//! Mean nearest-neighbor distance over trichome centroids.

mod kdtree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use kdtree::{KdTree, LEAF_SIZE};

/// Side of the measurement paper opening.
pub const DEFAULT_OPENING_MM: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DensityError {
    #[error("insufficient points: need at least 2, got {0}")]
    InsufficientPoints(usize),
    #[error("point coordinates must be finite")]
    NonFinite,
    #[error("opening size must be positive, got {0}")]
    InvalidOpening(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityResult {
    pub nnd_px: f64,
    pub nnd_mm: f64,
    pub n_points: usize,
    pub scale_mm_per_px: f64,
}

/// Nearest other point for every point, `(index, distance)`.
pub fn nearest_neighbors(points: &[(f64, f64)]) -> Result<Vec<(usize, f64)>, DensityError> {
    if points.len() < 2 {
        return Err(DensityError::InsufficientPoints(points.len()));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(DensityError::NonFinite);
    }
    let tree = KdTree::build(points);
    Ok((0..points.len())
        .map(|i| {
            let (j, d2) = tree.nearest_excluding(i).expect("at least two points");
            (j, d2.sqrt())
        })
        .collect())
}

/// Mean distance from each point to its nearest neighbor, summed in point
/// order.
pub fn mean_nnd(points: &[(f64, f64)]) -> Result<f64, DensityError> {
    let nn = nearest_neighbors(points)?;
    let sum: f64 = nn.iter().map(|&(_, d)| d).sum();
    Ok(sum / points.len() as f64)
}

/// Converts a pixel NND into millimetres using the opening as the ruler.
pub fn to_physical(
    nnd_px: f64,
    n_points: usize,
    opening_px: f64,
    opening_mm: f64,
) -> Result<DensityResult, DensityError> {
    if !(opening_px > 0.0) || !opening_px.is_finite() {
        return Err(DensityError::InvalidOpening(opening_px));
    }
    if !(opening_mm > 0.0) || !opening_mm.is_finite() {
        return Err(DensityError::InvalidOpening(opening_mm));
    }
    if n_points < 2 {
        return Err(DensityError::InsufficientPoints(n_points));
    }
    let scale = opening_mm / opening_px;
    Ok(DensityResult {
        nnd_px,
        nnd_mm: nnd_px * scale,
        n_points,
        scale_mm_per_px: scale,
    })
}

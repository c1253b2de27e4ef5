use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::watershed::Region;
use crate::contour::{chain_length, polygon_area, trace_boundary};
use crate::stats::quantile_sorted;

/// Smallest trichome head diameter kept, in millimetres.
pub const MIN_DIAMETER_MM: f64 = 0.010;
/// Tukey fence multiplier on the interquartile range.
pub const FENCE_K: f64 = 1.5;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FilterError {
    #[error("scale must be a positive number of mm per pixel, got {0}")]
    InvalidScale(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourStats {
    pub centroid: (f64, f64),
    /// Area enclosed by the traced boundary polygon, px².
    pub area: f64,
    /// Boundary chain length, px.
    pub perimeter: f64,
    pub circularity: f64,
    pub pixel_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fences {
    pub area: (f64, f64),
    pub perimeter: (f64, f64),
    pub circularity_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrichomeSet {
    pub points: Vec<(f64, f64)>,
    pub accepted_stats: Vec<ContourStats>,
    pub source_dims: (usize, usize),
    pub accepted: usize,
    pub rejected: usize,
    /// `None` when fewer than 4 candidates made the fences undefined and
    /// every candidate was accepted.
    pub fences: Option<Fences>,
}

impl TrichomeSet {
    pub fn fences_applied(&self) -> bool {
        self.fences.is_some()
    }
}

/// Shape statistics of one region from its outer boundary.
pub fn contour_stats(region: &Region) -> Option<ContourStats> {
    let first = *region.pixels.first()?;
    let (mut x0, mut y0, mut x1, mut y1) = (first.0, first.1, first.0, first.1);
    for &(x, y) in &region.pixels {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let bw = (x1 - x0 + 1) as usize;
    let bh = (y1 - y0 + 1) as usize;
    let mut local = vec![false; bw * bh];
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, y) in &region.pixels {
        local[(y - y0) as usize * bw + (x - x0) as usize] = true;
        sx += x as f64;
        sy += y as f64;
    }
    // first pixel in raster order
    let start = region
        .pixels
        .iter()
        .min_by_key(|&&(x, y)| (y, x))
        .copied()
        .unwrap_or(first);
    let inside = |x: i64, y: i64| {
        let (lx, ly) = (x - x0 as i64, y - y0 as i64);
        lx >= 0 && ly >= 0 && (lx as usize) < bw && (ly as usize) < bh && local[ly as usize * bw + lx as usize]
    };
    let boundary = trace_boundary((start.0 as i64, start.1 as i64), inside);
    let pts: Vec<(f64, f64)> = boundary.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
    let area = polygon_area(&pts);
    let perimeter = chain_length(&boundary);
    let n = region.pixels.len() as f64;
    let circularity = if perimeter > 0.0 {
        4.0 * std::f64::consts::PI * area / (perimeter * perimeter)
    } else {
        0.0
    };
    Some(ContourStats {
        centroid: (sx / n, sy / n),
        area,
        perimeter,
        circularity,
        pixel_count: region.pixels.len(),
    })
}

fn tukey(values: &mut [f64]) -> (f64, f64) {
    values.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(values, 0.25);
    let q3 = quantile_sorted(values, 0.75);
    let iqr = q3 - q1;
    (q1 - FENCE_K * iqr, q3 + FENCE_K * iqr)
}

/// Computes shape statistics and keeps regions inside the population's Tukey
/// fences (area and perimeter two-sided, circularity lower fence only).
///
/// Regions with zero enclosed area, or whose equivalent diameter is below
/// 10 µm at `scale` mm/px, are rejected before the fences are computed.
pub fn extract_and_filter(
    regions: &[Region],
    source_dims: (usize, usize),
    scale: f64,
) -> Result<TrichomeSet, FilterError> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(FilterError::InvalidScale(scale));
    }
    let min_diameter_px = MIN_DIAMETER_MM / scale;
    let candidates: Vec<ContourStats> = regions
        .iter()
        .filter_map(contour_stats)
        .filter(|s| {
            let eq_diameter = 2.0 * (s.pixel_count as f64 / std::f64::consts::PI).sqrt();
            s.area > 0.0 && s.perimeter > 0.0 && eq_diameter >= min_diameter_px
        })
        .collect();
    let pre_rejected = regions.len() - candidates.len();

    let fences = if candidates.len() < 4 {
        None
    } else {
        let mut areas: Vec<f64> = candidates.iter().map(|s| s.area).collect();
        let mut perims: Vec<f64> = candidates.iter().map(|s| s.perimeter).collect();
        let mut circs: Vec<f64> = candidates.iter().map(|s| s.circularity).collect();
        Some(Fences {
            area: tukey(&mut areas),
            perimeter: tukey(&mut perims),
            circularity_min: tukey(&mut circs).0,
        })
    };
    let accepted_stats: Vec<ContourStats> = candidates
        .iter()
        .filter(|s| match &fences {
            None => true,
            Some(f) => {
                s.area >= f.area.0
                    && s.area <= f.area.1
                    && s.perimeter >= f.perimeter.0
                    && s.perimeter <= f.perimeter.1
                    && s.circularity >= f.circularity_min
            }
        })
        .copied()
        .collect();
    let accepted = accepted_stats.len();
    Ok(TrichomeSet {
        points: accepted_stats.iter().map(|s| s.centroid).collect(),
        accepted_stats,
        source_dims,
        accepted,
        rejected: pre_rejected + candidates.len() - accepted,
        fences,
    })
}

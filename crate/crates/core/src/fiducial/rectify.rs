use super::detect::MarkerDetection;
use super::homography::{estimate_homography, Homography};
use super::{FiducialError, PaperLayout};
use crate::image::GrayImage;

/// Side of the fronto-parallel canvas the whole paper is warped onto.
pub const CANVAS_SIDE: usize = 1000;

/// Paper coordinate (mm) of a canvas pixel center.
pub fn canvas_to_mm(layout: &PaperLayout, cx: f64, cy: f64) -> (f64, f64) {
    let s = layout.paper_side_mm / CANVAS_SIDE as f64;
    ((cx + 0.5) * s, (cy + 0.5) * s)
}

/// Canvas pixel coordinate of a paper point (mm).
pub fn mm_to_canvas(layout: &PaperLayout, x: f64, y: f64) -> (f64, f64) {
    let k = CANVAS_SIDE as f64 / layout.paper_side_mm;
    (x * k - 0.5, y * k - 0.5)
}

#[derive(Debug, Clone)]
pub struct Rectified {
    pub image: GrayImage,
    /// Side of the opening in canvas pixels.
    pub opening_px: f64,
    /// Maps paper millimetres to source image pixels.
    pub paper_to_image: Homography,
}

impl Rectified {
    /// Canvas pixel range `[start, start + side)` covering the opening.
    pub fn opening_window(&self, layout: &PaperLayout) -> (usize, usize) {
        let (start, _) = mm_to_canvas(layout, layout.opening_origin_mm(), 0.0);
        let start = start.round().max(0.0) as usize;
        let side = (self.opening_px.round() as usize).min(CANVAS_SIDE - start);
        (start, side)
    }
}

/// Warps the paper onto the square canvas using the corners of markers 0..=3.
///
/// All 16 marker corners feed a least-squares homography; canvas pixels are
/// filled by inverse mapping with bilinear sampling (0 outside the source).
pub fn rectify(img: &GrayImage, markers: &[MarkerDetection], layout: &PaperLayout) -> Result<Rectified, FiducialError> {
    layout.validate()?;
    let mut src = Vec::with_capacity(16);
    let mut dst = Vec::with_capacity(16);
    for id in 0..4 {
        let mut hits = markers.iter().filter(|m| m.id == id);
        let det = hits.next().ok_or(FiducialError::MarkerNotFound(id))?;
        if hits.next().is_some() {
            return Err(FiducialError::DuplicateMarker(id));
        }
        let paper = layout
            .marker_corners_mm(id)
            .ok_or_else(|| FiducialError::InvalidLayout(format!("no slot for marker {id}")))?;
        src.extend_from_slice(&paper);
        dst.extend_from_slice(&det.corners);
    }
    let h = estimate_homography(&src, &dst)?;

    let n = CANVAS_SIDE;
    let mut data = vec![0.0f32; n * n];
    for cy in 0..n {
        for cx in 0..n {
            let (x, y) = canvas_to_mm(layout, cx as f64, cy as f64);
            let (u, v) = h.apply(x, y);
            if let Some(val) = img.sample_bilinear(u, v) {
                data[cy * n + cx] = val;
            }
        }
    }
    let image = GrayImage::from_vec(n, n, data).expect("canvas buffer matches its dimensions");
    let opening_px = layout.opening_side_mm / layout.paper_side_mm * n as f64;
    Ok(Rectified {
        image,
        opening_px,
        paper_to_image: h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn detections_for(layout: &PaperLayout, scale: f64, ids: &[usize]) -> Vec<MarkerDetection> {
        ids.iter()
            .map(|&id| {
                let c = layout.marker_corners_mm(id).unwrap();
                MarkerDetection {
                    id,
                    corners: c.map(|(x, y)| (x * scale, y * scale)),
                }
            })
            .collect()
    }

    #[test]
    fn missing_marker_is_named() {
        let layout = PaperLayout::default();
        let img = GrayImage::filled(100, 100, 128.0).unwrap();
        let err = rectify(&img, &detections_for(&layout, 5.0, &[0, 1, 3]), &layout).unwrap_err();
        assert_eq!(err.to_string(), "marker 2 not found");
        let err = rectify(&img, &detections_for(&layout, 5.0, &[0, 1, 2, 3, 1]), &layout).unwrap_err();
        assert_eq!(err, FiducialError::DuplicateMarker(1));
    }

    #[test]
    fn fronto_parallel_is_a_scaled_copy() {
        let layout = PaperLayout::default();
        // 100 px for 20 mm: 5 px/mm, with the paper starting at pixel edge -0.5.
        let img = GrayImage::from_fn(100, 100, |x, y| ((x * 2 + y) % 256) as f32).unwrap();
        let dets: Vec<MarkerDetection> = detections_for(&layout, 5.0, &[0, 1, 2, 3])
            .into_iter()
            .map(|mut d| {
                for c in d.corners.iter_mut() {
                    *c = (c.0 - 0.5, c.1 - 0.5);
                }
                d
            })
            .collect();
        let out = rectify(&img, &dets, &layout).unwrap();
        assert_eq!(out.opening_px, 600.0);
        assert_eq!(out.opening_window(&layout), (200, 600));
        for (cx, cy) in [(100usize, 100usize), (500, 300), (750, 20)] {
            let (x, y) = canvas_to_mm(&layout, cx as f64, cy as f64);
            let expected = img.sample_bilinear(x * 5.0 - 0.5, y * 5.0 - 0.5).unwrap();
            assert!((out.image.get(cx, cy) - expected).abs() < 1e-3);
        }
    }
}

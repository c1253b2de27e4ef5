use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::points::{poisson_points, Rect};
use super::SynthError;
use crate::density::mean_nnd;
use crate::fiducial::{default_dictionary, Homography, PaperLayout};
use crate::image::GrayImage;
use crate::metadata::{write_exif, ByteOrder, ExifTemplate};
use crate::seed::derive_seed;

/// Horizontal tilt range of the field captures, degrees.
pub const TILT_H_RANGE: (f64, f64) = (-12.52, 10.62);
/// Vertical tilt range, degrees.
pub const TILT_V_RANGE: (f64, f64) = (-9.04, 8.13);
/// Camera standoff range, millimetres.
pub const DISTANCE_RANGE: (f64, f64) = (79.0, 218.0);

/// Diameter of a glandular trichome head.
pub const TRICHOME_HEAD_MM: f64 = 0.060;
pub const PAPER_LEVEL: f32 = 220.0;
pub const INK_LEVEL: f32 = 20.0;
pub const OPENING_LEVEL: f32 = 30.0;
pub const BLOB_PEAK: f32 = 200.0;
pub const ISO_LADDER: [u16; 6] = [50, 100, 200, 400, 800, 1600];

const TEXELS_PER_MM: f64 = 100.0;
/// Exposure time times relative scene luminance.
const EXPOSURE_CONSTANT: f64 = 0.004;
const FRAME_MARGIN_PX: f64 = 8.0;

const POINT_STREAM: u64 = 1;
const SCENE_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

/// Blob standard deviation: the head diameter taken as the blob FWHM.
pub fn blob_sigma_mm() -> f64 {
    TRICHOME_HEAD_MM / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    /// Expected number of trichomes in the opening.
    pub lambda: f64,
    pub tilt_h: f64,
    pub tilt_v: f64,
    pub distance_mm: f64,
    /// Fractional luminance change across the frame.
    pub illum_gradient: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub layout: PaperLayout,
    pub image_side: usize,
    pub focal_px: f64,
    /// Coefficient of variation of the head diameter between trichomes.
    pub head_size_cv: f64,
    /// Smallest allowed distance between trichome centres; 0 gives a plain
    /// Poisson field.
    pub min_spacing_mm: f64,
}

impl SceneParams {
    pub fn new(lambda: f64, seed: u64) -> Self {
        Self {
            lambda,
            tilt_h: 0.0,
            tilt_v: 0.0,
            distance_mm: 150.0,
            illum_gradient: 0.0,
            noise_sigma: 0.0,
            seed,
            layout: PaperLayout::default(),
            image_side: 3000,
            focal_px: 10_000.0,
            head_size_cv: 0.15,
            min_spacing_mm: 2.0 * TRICHOME_HEAD_MM,
        }
    }

    /// Pose, standoff and illumination drawn uniformly from the capture
    /// envelope (gradient up to 0.3).
    pub fn sample_in_envelope(lambda: f64, noise_sigma: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SCENE_STREAM, 1));
        Self {
            tilt_h: rng.random_range(TILT_H_RANGE.0..=TILT_H_RANGE.1),
            tilt_v: rng.random_range(TILT_V_RANGE.0..=TILT_V_RANGE.1),
            distance_mm: rng.random_range(DISTANCE_RANGE.0..=DISTANCE_RANGE.1),
            illum_gradient: rng.random_range(0.0..0.3),
            noise_sigma,
            ..Self::new(lambda, seed)
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(SynthError::InvalidLambda(self.lambda));
        }
        let within = |v: f64, r: (f64, f64)| v >= r.0 && v <= r.1;
        if !within(self.tilt_h, TILT_H_RANGE) || !within(self.tilt_v, TILT_V_RANGE) {
            return Err(SynthError::OutsideEnvelope(format!(
                "tilt ({}, {}) outside [{}, {}] x [{}, {}]",
                self.tilt_h, self.tilt_v, TILT_H_RANGE.0, TILT_H_RANGE.1, TILT_V_RANGE.0, TILT_V_RANGE.1
            )));
        }
        if !within(self.distance_mm, DISTANCE_RANGE) {
            return Err(SynthError::OutsideEnvelope(format!(
                "distance {} mm outside [{}, {}]",
                self.distance_mm, DISTANCE_RANGE.0, DISTANCE_RANGE.1
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(SynthError::InvalidParameter(format!(
                "noise_sigma {}",
                self.noise_sigma
            )));
        }
        if !(0.0..1.0).contains(&self.illum_gradient) {
            return Err(SynthError::InvalidParameter(format!(
                "illum_gradient {}",
                self.illum_gradient
            )));
        }
        if !(0.0..=0.25).contains(&self.head_size_cv) {
            return Err(SynthError::InvalidParameter(format!(
                "head_size_cv {} outside [0, 0.25]",
                self.head_size_cv
            )));
        }
        if !(self.min_spacing_mm >= 0.0) || self.min_spacing_mm > 0.1 * self.layout.opening_side_mm {
            return Err(SynthError::InvalidParameter(format!(
                "min_spacing_mm {}",
                self.min_spacing_mm
            )));
        }
        if self.image_side < 64 || !(self.focal_px > 0.0) {
            return Err(SynthError::InvalidParameter(
                "image_side must be >= 64 and focal_px > 0".into(),
            ));
        }
        self.layout.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub seed: u64,
    /// Trichome centres in paper millimetres, all inside the opening.
    pub points_mm: Vec<(f64, f64)>,
    /// Head diameter of each trichome.
    pub head_diameters_mm: Vec<f64>,
    pub n_points: usize,
    pub true_nnd_mm: Option<f64>,
    /// Corners of markers 0..=3 in image pixels (TL, TR, BR, BL).
    pub marker_corners_px: Vec<[(f64, f64); 4]>,
    /// Paper millimetres to image pixels.
    pub homography: Homography,
    /// Expected spacing is under two blob sigmas, so blobs will fuse.
    pub merge_warning: bool,
    pub blob_sigma_mm: f64,
    pub exposure_time_s: f64,
    pub iso: u32,
    pub width: u32,
    pub height: u32,
    pub params: SceneParams,
}

#[derive(Debug, Clone)]
pub struct RenderedScene {
    pub image: GrayImage,
    pub exif: Vec<u8>,
    pub truth: SceneTruth,
}

/// Pinhole camera looking at the paper centre from `distance_mm`, rotated
/// by the vertical then horizontal tilt. Maps paper mm to image pixels.
pub fn camera_homography(p: &SceneParams) -> Result<Homography, SynthError> {
    let (a, b) = (p.tilt_v.to_radians(), p.tilt_h.to_radians());
    let rx = [[1.0, 0.0, 0.0], [0.0, a.cos(), -a.sin()], [0.0, a.sin(), a.cos()]];
    let ry = [[b.cos(), 0.0, b.sin()], [0.0, 1.0, 0.0], [-b.sin(), 0.0, b.cos()]];
    let r = crate::fiducial::matmul(&rx, &ry);
    let half = p.layout.paper_side_mm / 2.0;
    let c = (p.image_side as f64 - 1.0) / 2.0;
    let k = [[p.focal_px, 0.0, c], [0.0, p.focal_px, c], [0.0, 0.0, 1.0]];
    // columns r1, r2, t with the paper origin shifted to its centre
    let mut e = [[0.0; 3]; 3];
    for i in 0..3 {
        e[i][0] = r[i][0];
        e[i][1] = r[i][1];
        e[i][2] = -half * (r[i][0] + r[i][1]);
    }
    e[2][2] += p.distance_mm;
    Ok(Homography::from_matrix(crate::fiducial::matmul(&k, &e))?)
}

/// Paper reflectance map at `TEXELS_PER_MM`, blobs included.
fn paper_texture(layout: &PaperLayout, points: &[(f64, f64)], sigmas_mm: &[f64]) -> Result<GrayImage, SynthError> {
    let dict = default_dictionary();
    let side = (layout.paper_side_mm * TEXELS_PER_MM).round() as usize;
    let cell = layout.marker_side_mm / crate::fiducial::MARKER_GRID as f64;
    let grids: Vec<_> = (0..4)
        .map(|id| dict.cell_grid(id).expect("dictionary has 250 codes"))
        .collect();
    let mut tex = GrayImage::from_fn(side, side, |i, j| {
        let (u, v) = ((i as f64 + 0.5) / TEXELS_PER_MM, (j as f64 + 0.5) / TEXELS_PER_MM);
        if layout.in_opening(u, v) {
            return OPENING_LEVEL;
        }
        for (id, grid) in grids.iter().enumerate() {
            let (mx, my) = layout.marker_origin_mm(id).expect("ids 0..4");
            let (du, dv) = (u - mx, v - my);
            if du >= 0.0 && dv >= 0.0 && du < layout.marker_side_mm && dv < layout.marker_side_mm {
                let (c, r) = ((du / cell) as usize, (dv / cell) as usize);
                let g = crate::fiducial::MARKER_GRID - 1;
                return if grid[r.min(g)][c.min(g)] {
                    PAPER_LEVEL
                } else {
                    INK_LEVEL
                };
            }
        }
        PAPER_LEVEL
    })?;

    let lo = (layout.opening_origin_mm() * TEXELS_PER_MM).round() as i64;
    let hi = lo + (layout.opening_side_mm * TEXELS_PER_MM).round() as i64;
    let amp = (BLOB_PEAK - OPENING_LEVEL) as f64;
    let mut acc = vec![0.0f64; side * side];
    for (&(px, py), &sigma_mm) in points.iter().zip(sigmas_mm) {
        let radius = 4.0 * sigma_mm * TEXELS_PER_MM;
        let inv = 1.0 / (2.0 * sigma_mm * sigma_mm);
        let (cx, cy) = (px * TEXELS_PER_MM - 0.5, py * TEXELS_PER_MM - 0.5);
        let x0 = ((cx - radius).floor() as i64).max(lo);
        let x1 = ((cx + radius).ceil() as i64).min(hi - 1);
        let y0 = ((cy - radius).floor() as i64).max(lo);
        let y1 = ((cy + radius).ceil() as i64).min(hi - 1);
        for j in y0..=y1 {
            for i in x0..=x1 {
                let d2 = ((i as f64 - cx).powi(2) + (j as f64 - cy).powi(2)) / (TEXELS_PER_MM * TEXELS_PER_MM);
                acc[j as usize * side + i as usize] += amp * (-d2 * inv).exp();
            }
        }
    }
    for j in lo.max(0) as usize..hi as usize {
        for i in lo.max(0) as usize..hi as usize {
            let v = tex.get(i, j) as f64 + acc[j * side + i];
            tex.set(i, j, v.min(255.0) as f32);
        }
    }
    Ok(tex)
}

fn sample_clamped(tex: &GrayImage, x: f64, y: f64) -> f32 {
    let max = (tex.width() - 1) as f64;
    tex.sample_bilinear(x.clamp(0.0, max), y.clamp(0.0, max)).unwrap_or(0.0)
}

/// `N ~ Poisson(lambda)` uniform points placed one at a time, redrawing any
/// point closer than `spacing` to one already placed.
pub fn spaced_points(lambda: f64, region: Rect, spacing: f64, seed: u64) -> Result<Vec<(f64, f64)>, SynthError> {
    let raw = poisson_points(lambda, region, seed)?;
    if spacing <= 0.0 {
        return Ok(raw);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, POINT_STREAM, 2));
    let s2 = spacing * spacing;
    let mut placed: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
    for first in raw {
        let mut cand = first;
        let mut tries = 0;
        while placed
            .iter()
            .any(|q| (q.0 - cand.0).powi(2) + (q.1 - cand.1).powi(2) < s2)
        {
            tries += 1;
            if tries > 10_000 {
                return Err(SynthError::InvalidParameter(format!(
                    "cannot place {} points {spacing} mm apart",
                    placed.len() + 1
                )));
            }
            cand = (
                rng.random_range(region.x0..region.x1),
                rng.random_range(region.y0..region.y1),
            );
        }
        placed.push(cand);
    }
    Ok(placed)
}

/// ISO ladder entry closest, in stops, to `target`.
fn nearest_iso(target: f64) -> u16 {
    *ISO_LADDER
        .iter()
        .min_by(|a, b| {
            let da = (**a as f64 / target).ln().abs();
            let db = (**b as f64 / target).ln().abs();
            da.total_cmp(&db)
        })
        .expect("ladder is non-empty")
}

/// Exposure rational `1/den` and ISO from standoff and mean image level.
/// Closer captures shade the leaf, the camera lengthens the exposure and
/// raises ISO with it.
pub fn exposure_model(distance_mm: f64, mean_level: f64) -> ((u32, u32), u16) {
    let (lo, hi) = DISTANCE_RANGE;
    let ambient = 1.0 - 0.4 * ((hi - distance_mm) / (hi - lo)).clamp(0.0, 1.0);
    let luminance = (ambient * mean_level / 255.0).max(1e-3);
    let t = EXPOSURE_CONSTANT / luminance;
    let den = (1.0 / t).round().max(1.0) as u32;
    let iso = nearest_iso(100.0 * (1.0 / den as f64) / 0.01);
    ((1, den), iso)
}

/// Renders a photograph of the measurement paper lying on a leaf.
///
/// Steps: Poisson trichomes in the opening, paper texture with markers and
/// Gaussian blobs, perspective projection with 2x2 supersampling, linear
/// illumination field, Gaussian noise, 8-bit quantization, EXIF template.
pub fn render_scene(p: &SceneParams) -> Result<RenderedScene, SynthError> {
    p.validate()?;
    let layout = &p.layout;
    let lo = layout.opening_origin_mm();
    let opening = Rect::new(lo, lo, lo + layout.opening_side_mm, lo + layout.opening_side_mm);
    let points = spaced_points(
        p.lambda,
        opening,
        p.min_spacing_mm,
        derive_seed(p.seed, POINT_STREAM, 0),
    )?;
    let sigma = blob_sigma_mm();
    let mut size_rng = ChaCha8Rng::seed_from_u64(derive_seed(p.seed, POINT_STREAM, 1));
    let size = Normal::new(1.0, p.head_size_cv).map_err(|e| SynthError::InvalidParameter(e.to_string()))?;
    let scales: Vec<f64> = points
        .iter()
        .map(|_| size.sample(&mut size_rng).clamp(0.75, 1.25))
        .collect();
    let sigmas: Vec<f64> = scales.iter().map(|k| k * sigma).collect();

    let h = camera_homography(p)?;
    let side = p.image_side as f64;
    let s = layout.paper_side_mm;
    for (u, v) in [(0.0, 0.0), (s, 0.0), (s, s), (0.0, s)] {
        let (x, y) = h.apply(u, v);
        if !(x >= FRAME_MARGIN_PX
            && y >= FRAME_MARGIN_PX
            && x <= side - 1.0 - FRAME_MARGIN_PX
            && y <= side - 1.0 - FRAME_MARGIN_PX)
        {
            return Err(SynthError::PaperOutsideFrame);
        }
    }
    let inv = h.inverse()?;
    let tex = paper_texture(layout, &points, &sigmas)?;

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(p.seed, SCENE_STREAM, 0));
    let background: f32 = rng.random_range(60.0..100.0);
    let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let (gx, gy) = (angle.cos(), angle.sin());

    let n = p.image_side;
    let centre = (side - 1.0) / 2.0;
    let mut data = vec![0.0f32; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let mut sum = 0.0f32;
            for (dx, dy) in [(-0.25, -0.25), (0.25, -0.25), (-0.25, 0.25), (0.25, 0.25)] {
                let (u, v) = inv.apply(x as f64 + dx, y as f64 + dy);
                sum += if u >= 0.0 && v >= 0.0 && u < s && v < s {
                    sample_clamped(&tex, u * TEXELS_PER_MM - 0.5, v * TEXELS_PER_MM - 0.5)
                } else {
                    background
                };
            }
            let t = ((x as f64 - centre) * gx + (y as f64 - centre) * gy) / side;
            *out = sum / 4.0 * (1.0 + p.illum_gradient * t) as f32;
        }
    });
    if p.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, p.noise_sigma as f32).map_err(|e| SynthError::InvalidParameter(e.to_string()))?;
        let mut nrng = ChaCha8Rng::seed_from_u64(derive_seed(p.seed, NOISE_STREAM, 0));
        for v in data.iter_mut() {
            *v += normal.sample(&mut nrng);
        }
    }
    for v in data.iter_mut() {
        *v = v.round().clamp(0.0, 255.0);
    }
    let image = GrayImage::from_vec(n, n, data)?;

    let ((num, den), iso) = exposure_model(p.distance_mm, image.mean());
    let exif = write_exif(
        &ExifTemplate {
            exposure: (num, den),
            iso,
            width: n as u32,
            height: n as u32,
        },
        ByteOrder::Little,
    );
    let marker_corners_px = (0..4)
        .map(|id| {
            let c = layout.marker_corners_mm(id).expect("ids 0..4");
            c.map(|(u, v)| h.apply(u, v))
        })
        .collect();
    let spacing = 0.5 / (p.lambda / opening.area()).sqrt();
    let truth = SceneTruth {
        seed: p.seed,
        n_points: points.len(),
        true_nnd_mm: mean_nnd(&points).ok(),
        points_mm: points,
        head_diameters_mm: scales.iter().map(|k| k * TRICHOME_HEAD_MM).collect(),
        marker_corners_px,
        homography: h,
        merge_warning: spacing < 2.0 * sigma,
        blob_sigma_mm: sigma,
        exposure_time_s: num as f64 / den as f64,
        iso: iso as u32,
        width: n as u32,
        height: n as u32,
        params: p.clone(),
    };
    Ok(RenderedScene { image, exif, truth })
}

use serde::{Deserialize, Serialize};

use super::dictionary::{MarkerDictionary, MARKER_GRID};
use super::homography::estimate_homography;
use crate::contour::{chain_length, simplify_closed, trace_boundary};
use crate::image::GrayImage;

/// Smallest accepted marker side in pixels (two pixels per cell).
const MIN_SIDE_PX: f64 = 12.0;
/// Douglas–Peucker tolerance as a fraction of the contour perimeter.
const APPROX_FRACTION: f64 = 0.02;
/// Samples per cell axis inside the central third of each cell.
const CELL_SAMPLES: usize = 4;

/// A decoded marker. Corners run clockwise from the marker's canonical
/// top-left corner, in image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerDetection {
    pub id: usize,
    pub corners: [(f64, f64); 4],
}

struct Component {
    start: (i64, i64),
    count: usize,
    min: (usize, usize),
    max: (usize, usize),
    touches_border: bool,
}

/// Labels 8-connected dark (< 128) components. Returns the label image
/// (0 = unlabeled) and per-component summaries indexed by `label - 1`.
fn label_dark(binary: &GrayImage) -> (Vec<u32>, Vec<Component>) {
    let (w, h) = binary.dimensions();
    let px = binary.pixels();
    let mut labels = vec![0u32; w * h];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for i in 0..w * h {
        if labels[i] != 0 || px[i] >= 127.5 {
            continue;
        }
        let label = comps.len() as u32 + 1;
        let (sx, sy) = (i % w, i / w);
        let mut comp = Component {
            start: (sx as i64, sy as i64),
            count: 0,
            min: (sx, sy),
            max: (sx, sy),
            touches_border: false,
        };
        labels[i] = label;
        stack.push(i);
        while let Some(j) = stack.pop() {
            let (x, y) = (j % w, j / w);
            comp.count += 1;
            comp.min = (comp.min.0.min(x), comp.min.1.min(y));
            comp.max = (comp.max.0.max(x), comp.max.1.max(y));
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                comp.touches_border = true;
            }
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let k = ny as usize * w + nx as usize;
                    if labels[k] == 0 && px[k] < 127.5 {
                        labels[k] = label;
                        stack.push(k);
                    }
                }
            }
        }
        comps.push(comp);
    }
    (labels, comps)
}

/// Least-squares line through `pts`: (centroid, unit direction).
fn fit_line(pts: &[(f64, f64)]) -> ((f64, f64), (f64, f64)) {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p.0 - cx, p.1 - cy);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    ((cx, cy), (theta.cos(), theta.sin()))
}

fn intersect(p: (f64, f64), d: (f64, f64), q: (f64, f64), e: (f64, f64)) -> Option<(f64, f64)> {
    let denom = d.0 * e.1 - d.1 * e.0;
    if denom.abs() < 1e-9 {
        return None;
    }
    let t = ((q.0 - p.0) * e.1 - (q.1 - p.1) * e.0) / denom;
    Some((p.0 + t * d.0, p.1 + t * d.1))
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

fn strictly_convex(q: &[(f64, f64); 4]) -> bool {
    let signs: Vec<f64> = (0..4).map(|i| cross(q[i], q[(i + 1) % 4], q[(i + 2) % 4])).collect();
    signs.iter().all(|&s| s > 0.0) || signs.iter().all(|&s| s < 0.0)
}

/// Sub-pixel corners from a clockwise boundary and its four polygon vertices.
///
/// Each side is refit as a line through its boundary pixels (away from the
/// corners), pushed out by half a pixel to sit on the dark/light edge rather
/// than on the outermost dark pixel centers, and neighbouring lines are
/// intersected.
fn refine_corners(contour: &[(f64, f64)], vertices: &[usize]) -> [(f64, f64); 4] {
    let n = contour.len();
    let mut lines = Vec::with_capacity(4);
    for k in 0..4 {
        let a = vertices[k];
        let b = vertices[(k + 1) % 4];
        let (va, vb) = (contour[a], contour[b]);
        let side = dist(va, vb);
        let trim = (0.1 * side).max(1.5);
        let span = (b + n - a) % n;
        let pts: Vec<(f64, f64)> = (0..=span)
            .map(|i| contour[(a + i) % n])
            .filter(|&p| dist(p, va) >= trim && dist(p, vb) >= trim)
            .collect();
        let along = ((vb.0 - va.0) / side.max(1e-12), (vb.1 - va.1) / side.max(1e-12));
        let (c, mut d) = if pts.len() >= 2 { fit_line(&pts) } else { (va, along) };
        if d.0 * along.0 + d.1 * along.1 < 0.0 {
            d = (-d.0, -d.1);
        }
        // Clockwise traversal on a y-down image: the outward normal is (dy, -dx).
        let normal = (d.1, -d.0);
        let shift = 0.5 * d.0.abs().max(d.1.abs());
        lines.push(((c.0 + shift * normal.0, c.1 + shift * normal.1), d));
    }
    let mut corners = [(0.0, 0.0); 4];
    for k in 0..4 {
        let (p, d) = lines[(k + 3) % 4];
        let (q, e) = lines[k];
        corners[k] = intersect(p, d, q, e).unwrap_or(contour[vertices[k]]);
    }
    corners
}

/// Reads the 6x6 cell grid with `corners[0]` as the top-left cell corner.
/// `None` if any sample falls outside the image.
fn read_grid(img: &GrayImage, corners: &[(f64, f64); 4]) -> Option<[[bool; MARKER_GRID]; MARKER_GRID]> {
    let g = MARKER_GRID as f64;
    let square = [(0.0, 0.0), (g, 0.0), (g, g), (0.0, g)];
    let h = estimate_homography(&square, corners).ok()?;
    let mut grid = [[false; MARKER_GRID]; MARKER_GRID];
    for (r, row) in grid.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            let mut sum = 0.0;
            for i in 0..CELL_SAMPLES {
                for j in 0..CELL_SAMPLES {
                    let u = c as f64 + (1.0 + (j as f64 + 0.5) / CELL_SAMPLES as f64) / 3.0;
                    let v = r as f64 + (1.0 + (i as f64 + 0.5) / CELL_SAMPLES as f64) / 3.0;
                    let (x, y) = h.apply(u, v);
                    sum += img.sample_bilinear(x, y)? as f64;
                }
            }
            *cell = sum / (CELL_SAMPLES * CELL_SAMPLES) as f64 > 127.5;
        }
    }
    Some(grid)
}

fn decode(grid: &[[bool; MARKER_GRID]; MARKER_GRID]) -> Option<u16> {
    let last = MARKER_GRID - 1;
    for i in 0..MARKER_GRID {
        if grid[0][i] || grid[last][i] || grid[i][0] || grid[i][last] {
            return None;
        }
    }
    let mut code = 0u16;
    for r in 0..4 {
        for c in 0..4 {
            if grid[r + 1][c + 1] {
                code |= 1 << (15 - (4 * r + c));
            }
        }
    }
    Some(code)
}

/// Finds dictionary markers in a binarized image (dark markers on a light
/// surround). Components touching the image border are ignored.
pub fn detect_markers(binary: &GrayImage, dict: &MarkerDictionary) -> Vec<MarkerDetection> {
    let (w, _) = binary.dimensions();
    let (labels, comps) = label_dark(binary);
    let mut found = Vec::new();
    for (idx, comp) in comps.iter().enumerate() {
        let bw = (comp.max.0 - comp.min.0 + 1) as f64;
        let bh = (comp.max.1 - comp.min.1 + 1) as f64;
        if comp.touches_border || bw < MIN_SIDE_PX || bh < MIN_SIDE_PX || comp.count < 64 {
            continue;
        }
        let label = idx as u32 + 1;
        let inside = |x: i64, y: i64| {
            x >= 0
                && y >= 0
                && (x as usize) < w
                && (y as usize) < binary.height()
                && labels[y as usize * w + x as usize] == label
        };
        let boundary = trace_boundary(comp.start, inside);
        let perimeter = chain_length(&boundary);
        let contour: Vec<(f64, f64)> = boundary.iter().map(|&(x, y)| (x as f64, y as f64)).collect();
        let mut vertices = simplify_closed(&contour, APPROX_FRACTION * perimeter);
        if vertices.len() != 4 {
            continue;
        }
        // Keep traversal order starting from the smallest contour index.
        let min_pos = (0..4).min_by_key(|&i| vertices[i]).unwrap_or(0);
        vertices.rotate_left(min_pos);
        let quad = [
            contour[vertices[0]],
            contour[vertices[1]],
            contour[vertices[2]],
            contour[vertices[3]],
        ];
        if !strictly_convex(&quad) || (0..4).any(|k| dist(quad[k], quad[(k + 1) % 4]) < MIN_SIDE_PX) {
            continue;
        }
        let corners = refine_corners(&contour, &vertices);
        if !strictly_convex(&corners) {
            continue;
        }
        for k in 0..4 {
            let ordered = [
                corners[k],
                corners[(k + 1) % 4],
                corners[(k + 2) % 4],
                corners[(k + 3) % 4],
            ];
            let Some(grid) = read_grid(binary, &ordered) else {
                break;
            };
            if let Some(id) = decode(&grid).and_then(|code| dict.lookup(code)) {
                found.push(MarkerDetection { id, corners: ordered });
                break;
            }
        }
    }
    found
}

/// Half-length of the grey-level profile read across each side, in pixels.
const PROFILE_HALF_PX: f64 = 3.0;
const PROFILE_STEP_PX: f64 = 0.25;
/// Profiles with less ink/paper contrast than this are skipped.
const MIN_EDGE_CONTRAST: f64 = 20.0;

/// Edge offset along `normal` (positive = outward) from `p`, found by
/// integrating the normalized profile between the dark and light ends.
fn edge_offset(img: &GrayImage, p: (f64, f64), normal: (f64, f64)) -> Option<f64> {
    let steps = (2.0 * PROFILE_HALF_PX / PROFILE_STEP_PX).round() as usize;
    let mut values = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let s = -PROFILE_HALF_PX + i as f64 * PROFILE_STEP_PX;
        values.push(img.sample_bilinear(p.0 + s * normal.0, p.1 + s * normal.1)? as f64);
    }
    let (dark, light) = (values[0], values[steps]);
    if light - dark < MIN_EDGE_CONTRAST {
        return None;
    }
    let mut area = 0.0;
    for w in values.windows(2) {
        let a = (light - w[0]) / (light - dark);
        let b = (light - w[1]) / (light - dark);
        area += 0.5 * (a + b) * PROFILE_STEP_PX;
    }
    Some(area - PROFILE_HALF_PX)
}

/// Moves each side of a detection onto the grey-level edge between the dark
/// border and the paper, then re-intersects neighbouring sides.
///
/// Global binarization places edges where the threshold crosses the local
/// ink/paper transition, which drifts with illumination; the grey image has
/// the midpoint. Sides without a readable profile keep the binary estimate,
/// and so does the whole detection if the result is not a convex quad.
pub fn refine_corners_gray(img: &GrayImage, det: &MarkerDetection) -> MarkerDetection {
    let q = det.corners;
    let centre = (
        q.iter().map(|c| c.0).sum::<f64>() / 4.0,
        q.iter().map(|c| c.1).sum::<f64>() / 4.0,
    );
    let mut lines = Vec::with_capacity(4);
    for k in 0..4 {
        let (a, b) = (q[k], q[(k + 1) % 4]);
        let len = dist(a, b);
        let d = ((b.0 - a.0) / len, (b.1 - a.1) / len);
        let mid = (0.5 * (a.0 + b.0), 0.5 * (a.1 + b.1));
        let mut n = (d.1, -d.0);
        if n.0 * (mid.0 - centre.0) + n.1 * (mid.1 - centre.1) < 0.0 {
            n = (-n.0, -n.1);
        }
        let stations = (0.7 * len).floor().max(2.0) as usize;
        let pts: Vec<(f64, f64)> = (0..stations)
            .filter_map(|i| {
                let t = len * (0.15 + 0.7 * i as f64 / (stations - 1) as f64);
                let p = (a.0 + t * d.0, a.1 + t * d.1);
                edge_offset(img, p, n).map(|s| (p.0 + s * n.0, p.1 + s * n.1))
            })
            .collect();
        if pts.len() >= stations / 2 && pts.len() >= 2 {
            let (c, mut e) = fit_line(&pts);
            if e.0 * d.0 + e.1 * d.1 < 0.0 {
                e = (-e.0, -e.1);
            }
            lines.push((c, e));
        } else {
            lines.push((a, d));
        }
    }
    let mut corners = q;
    for k in 0..4 {
        let (p, d) = lines[(k + 3) % 4];
        let (r, e) = lines[k];
        match intersect(p, d, r, e) {
            Some(c) => corners[k] = c,
            None => return *det,
        }
    }
    if !strictly_convex(&corners) || (0..4).any(|k| dist(corners[k], q[k]) > PROFILE_HALF_PX) {
        return *det;
    }
    MarkerDetection { id: det.id, corners }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiducial::generate_dictionary;

    /// Draws marker `id` as an axis-aligned square with `cell` px per cell.
    fn draw_marker(dict: &MarkerDictionary, id: usize, size: usize, x0: usize, y0: usize, cell: usize) -> GrayImage {
        let grid = dict.cell_grid(id).unwrap();
        let side = cell * MARKER_GRID;
        GrayImage::from_fn(size, size, |x, y| {
            if x >= x0 && y >= y0 && x < x0 + side && y < y0 + side {
                if grid[(y - y0) / cell][(x - x0) / cell] {
                    255.0
                } else {
                    0.0
                }
            } else {
                255.0
            }
        })
        .unwrap()
    }

    #[test]
    fn blank_image_has_no_markers() {
        let dict = generate_dictionary(0).unwrap();
        let img = GrayImage::filled(64, 64, 255.0).unwrap();
        assert!(detect_markers(&img, &dict).is_empty());
    }

    #[test]
    fn axis_aligned_marker() {
        let dict = generate_dictionary(0).unwrap();
        // 80x80 px marker: pixels 20..100 are dark, edges at 19.5 and 99.5.
        let img = draw_marker(&dict, 7, 140, 20, 20, 80 / 6 + 1);
        let side = (80 / 6 + 1) as f64 * 6.0;
        let found = detect_markers(&img, &dict);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].id, 7);
        let lo = 19.5;
        let hi = 19.5 + side;
        let expected = [(lo, lo), (hi, lo), (hi, hi), (lo, hi)];
        for (c, e) in found[0].corners.iter().zip(expected) {
            assert!(dist(*c, e) < 1.0, "{c:?} vs {e:?}");
        }
    }

    #[test]
    fn rotated_marker_reorders_corners() {
        let dict = generate_dictionary(0).unwrap();
        let upright = draw_marker(&dict, 7, 120, 20, 20, 13);
        let (w, h) = upright.dimensions();
        let turned = GrayImage::from_fn(w, h, |x, y| upright.get(w - 1 - x, h - 1 - y)).unwrap();
        let found = detect_markers(&turned, &dict);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].id, 7);
        // canonical top-left now sits at the bottom-right of the image
        let tl = found[0].corners[0];
        let br = found[0].corners[2];
        assert!(tl.0 > br.0 && tl.1 > br.1);
        assert!(dist(tl, (w as f64 - 1.0 - 19.5, h as f64 - 1.0 - 19.5)) < 1.0);
    }

    #[test]
    fn marker_touching_border_is_ignored() {
        let dict = generate_dictionary(0).unwrap();
        let img = draw_marker(&dict, 3, 78, 0, 0, 13);
        assert!(detect_markers(&img, &dict).is_empty());
    }

    /// Dark square covering [lo, hi]^2 in pixel coordinates (pixel i spans
    /// i - 0.5 .. i + 0.5), rendered by exact area coverage.
    fn grey_square(size: usize, lo: f64, hi: f64) -> GrayImage {
        let cover = |i: usize| ((i as f64 + 0.5).min(hi) - (i as f64 - 0.5).max(lo)).clamp(0.0, 1.0);
        GrayImage::from_fn(size, size, |x, y| (220.0 - 200.0 * cover(x) * cover(y)) as f32).unwrap()
    }

    #[test]
    fn grey_refinement_finds_the_true_edge() {
        let dict = generate_dictionary(0).unwrap();
        let found = detect_markers(&draw_marker(&dict, 7, 140, 20, 20, 13), &dict);
        let (lo, hi) = (19.8, 97.3);
        let expected = [(lo, lo), (hi, lo), (hi, hi), (lo, hi)];
        let grey = grey_square(140, lo, hi);
        let r = refine_corners_gray(&grey, &found[0]);
        assert_eq!(r.id, 7);
        for (c, e) in r.corners.iter().zip(expected) {
            assert!(dist(*c, e) < 0.05, "{c:?} vs {e:?}");
        }
        // a dimmed right half moves a global threshold but not the grey edge
        let dim = GrayImage::from_fn(140, 140, |x, y| grey.get(x, y) * if x > 70 { 0.6 } else { 1.0 }).unwrap();
        let r = refine_corners_gray(&dim, &found[0]);
        for (c, e) in r.corners.iter().zip(expected) {
            assert!(dist(*c, e) < 0.05, "{c:?} vs {e:?}");
        }
    }

    #[test]
    fn refinement_without_contrast_keeps_binary_corners() {
        let dict = generate_dictionary(0).unwrap();
        let binary = draw_marker(&dict, 7, 140, 20, 20, 13);
        let found = detect_markers(&binary, &dict);
        let flat = GrayImage::filled(140, 140, 128.0).unwrap();
        assert_eq!(refine_corners_gray(&flat, &found[0]), found[0]);
    }
}

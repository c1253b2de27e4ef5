//! Outer-boundary tracing and polygon helpers shared by marker detection and
//! trichome shape statistics.

/// 8-neighborhood offsets in clockwise order for a y-down image.
const DIRS: [(i64, i64); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

fn dir_index(dx: i64, dy: i64) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("backtrack pixel must be an 8-neighbor")
}

/// Traces the outer 8-connected boundary of a region with Moore-neighbor
/// tracing. `start` must be the first region pixel in raster order; `inside`
/// reports region membership and must return `false` outside the image.
///
/// The boundary is returned clockwise (screen orientation) without repeating
/// the start pixel.
pub fn trace_boundary(start: (i64, i64), inside: impl Fn(i64, i64) -> bool) -> Vec<(i64, i64)> {
    let step = |p: (i64, i64), back: (i64, i64)| -> Option<((i64, i64), (i64, i64))> {
        let bd = dir_index(back.0 - p.0, back.1 - p.1);
        let mut prev = back;
        for k in 1..=8 {
            let d = DIRS[(bd + k) % 8];
            let cand = (p.0 + d.0, p.1 + d.1);
            if inside(cand.0, cand.1) {
                return Some((cand, prev));
            }
            prev = cand;
        }
        None
    };

    let mut contour = vec![start];
    let mut p = start;
    let mut back = (start.0 - 1, start.1);
    loop {
        let Some((next, new_back)) = step(p, back) else {
            return contour;
        };
        if p == start && contour.len() > 1 && next == contour[1] {
            break;
        }
        contour.push(next);
        p = next;
        back = new_back;
    }
    if contour.len() > 1 && contour.last() == Some(&start) {
        contour.pop();
    }
    contour
}

/// Length of the closed chain with unit axis steps and `sqrt(2)` diagonals.
pub fn chain_length(contour: &[(i64, i64)]) -> f64 {
    if contour.len() < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..contour.len() {
        let a = contour[i];
        let b = contour[(i + 1) % contour.len()];
        let diagonal = (a.0 - b.0).abs() == 1 && (a.1 - b.1).abs() == 1;
        total += if diagonal { std::f64::consts::SQRT_2 } else { 1.0 };
    }
    total
}

/// Shoelace area of the closed polygon through the contour points.
pub fn polygon_area(points: &[(f64, f64)]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0.0;
    for i in 0..n {
        let (x0, y0) = points[i];
        let (x1, y1) = points[(i + 1) % n];
        twice += x0 * y1 - x1 * y0;
    }
    twice.abs() / 2.0
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return ((p.0 - a.0).powi(2) + (p.1 - a.1).powi(2)).sqrt();
    }
    ((p.0 - a.0) * dy - (p.1 - a.1) * dx).abs() / len2.sqrt()
}

fn douglas_peucker(points: &[(f64, f64)], lo: usize, hi: usize, eps: f64, keep: &mut Vec<usize>) {
    if hi <= lo + 1 {
        return;
    }
    let (mut best, mut best_d) = (lo, -1.0);
    for i in (lo + 1)..hi {
        let d = point_segment_distance(points[i], points[lo], points[hi]);
        if d > best_d {
            best = i;
            best_d = d;
        }
    }
    if best_d > eps {
        douglas_peucker(points, lo, best, eps, keep);
        keep.push(best);
        douglas_peucker(points, best, hi, eps, keep);
    }
}

/// Douglas–Peucker simplification of a closed contour. The contour is split at
/// the two mutually farthest points (diagonal extremes), which are always kept.
/// Returns indices into `contour` in traversal order.
pub fn simplify_closed(contour: &[(f64, f64)], eps: f64) -> Vec<usize> {
    let n = contour.len();
    if n < 3 {
        return (0..n).collect();
    }
    let dist2 = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2);
    let farthest_from = |from: usize| {
        (0..n)
            .max_by(|&i, &j| dist2(contour[from], contour[i]).total_cmp(&dist2(contour[from], contour[j])))
            .unwrap_or(0)
    };
    let a = farthest_from(0);
    let b = farthest_from(a);
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    if lo == hi {
        return vec![lo];
    }

    // Unroll the ring so that both chains are contiguous slices.
    let ring: Vec<(f64, f64)> = contour.iter().chain(contour.iter()).copied().collect();
    let mut keep = vec![lo];
    douglas_peucker(&ring, lo, hi, eps, &mut keep);
    keep.push(hi);
    douglas_peucker(&ring, hi, lo + n, eps, &mut keep);
    keep.into_iter().map(|i| i % n).collect()
}

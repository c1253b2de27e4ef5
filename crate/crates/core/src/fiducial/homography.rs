use serde::{Deserialize, Serialize};

use super::FiducialError;
use crate::linalg::symmetric_eigen;

/// Projective transform of the plane, stored with `m[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    pub m: [[f64; 3]; 3],
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        }
    }

    /// Normalizes so that `m[2][2] == 1` and checks invertibility.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self, FiducialError> {
        if m.iter().flatten().any(|v| !v.is_finite()) || m[2][2].abs() < 1e-300 {
            return Err(FiducialError::DegenerateHomography);
        }
        let s = m[2][2];
        let mut n = m;
        for v in n.iter_mut().flatten() {
            *v /= s;
        }
        let h = Self { m: n };
        if h.determinant().abs() <= 1e-12 {
            return Err(FiducialError::DegenerateHomography);
        }
        Ok(h)
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        let w = m[2][0] * x + m[2][1] * y + m[2][2];
        (
            (m[0][0] * x + m[0][1] * y + m[0][2]) / w,
            (m[1][0] * x + m[1][1] * y + m[1][2]) / w,
        )
    }

    pub fn inverse(&self) -> Result<Self, FiducialError> {
        let m = &self.m;
        let det = self.determinant();
        if det.abs() <= 1e-300 {
            return Err(FiducialError::DegenerateHomography);
        }
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        let mut inv = adj;
        for v in inv.iter_mut().flatten() {
            *v /= det;
        }
        Self::from_matrix(inv)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Self, FiducialError> {
        Self::from_matrix(matmul(&self.m, &other.m))
    }
}

pub(crate) fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Similarity transform moving the centroid to the origin with mean distance
/// `sqrt(2)` (Hartley normalization).
fn normalizer(points: &[(f64, f64)]) -> [[f64; 3]; 3] {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p.0 - cx).powi(2) + (p.1 - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    [[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]]
}

fn apply_raw(m: &[[f64; 3]; 3], p: (f64, f64)) -> (f64, f64) {
    let w = m[2][0] * p.0 + m[2][1] * p.1 + m[2][2];
    (
        (m[0][0] * p.0 + m[0][1] * p.1 + m[0][2]) / w,
        (m[1][0] * p.0 + m[1][1] * p.1 + m[1][2]) / w,
    )
}

/// Normalized DLT estimate of the homography mapping `src[i]` onto `dst[i]`.
///
/// Exact for four noiseless correspondences; least squares (algebraic error on
/// normalized coordinates) for more.
pub fn estimate_homography(src: &[(f64, f64)], dst: &[(f64, f64)]) -> Result<Homography, FiducialError> {
    if src.len() != dst.len() {
        return Err(FiducialError::CorrespondenceMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 4 {
        return Err(FiducialError::TooFewCorrespondences(src.len()));
    }
    if src
        .iter()
        .chain(dst.iter())
        .any(|p| !p.0.is_finite() || !p.1.is_finite())
    {
        return Err(FiducialError::DegenerateHomography);
    }

    let t_src = normalizer(src);
    let t_dst = normalizer(dst);

    // Accumulate A^T A for the 2N x 9 DLT system directly.
    let mut ata = vec![vec![0.0; 9]; 9];
    for (&s, &d) in src.iter().zip(dst) {
        let (x, y) = apply_raw(&t_src, s);
        let (u, v) = apply_raw(&t_dst, d);
        let r1 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r2 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for row in [r1, r2] {
            for i in 0..9 {
                for j in 0..9 {
                    ata[i][j] += row[i] * row[j];
                }
            }
        }
    }

    let (values, vectors) = symmetric_eigen(&ata);
    let largest = values[8].abs().max(f64::MIN_POSITIVE);
    // A one-dimensional null space is required; a second near-zero eigenvalue
    // means the correspondences do not pin down a unique transform.
    if values[1].abs() <= 1e-10 * largest {
        return Err(FiducialError::DegenerateHomography);
    }
    let h: Vec<f64> = (0..9).map(|r| vectors[r][0]).collect();
    let h_norm = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]];

    let t_dst_inv = {
        let s = t_dst[0][0];
        [
            [1.0 / s, 0.0, -t_dst[0][2] / s],
            [0.0, 1.0 / s, -t_dst[1][2] / s],
            [0.0, 0.0, 1.0],
        ]
    };
    let m = matmul(&t_dst_inv, &matmul(&h_norm, &t_src));
    Homography::from_matrix(m)
}

/// Largest Euclidean distance between `h(src[i])` and `dst[i]`.
pub fn max_reprojection_error(h: &Homography, src: &[(f64, f64)], dst: &[(f64, f64)]) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(&s, &d)| {
            let (x, y) = h.apply(s.0, s.1);
            ((x - d.0).powi(2) + (y - d.1).powi(2)).sqrt()
        })
        .fold(0.0, f64::max)
}

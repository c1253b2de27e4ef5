use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::SynthError;

/// Cut position of the default half-plane damage.
pub const DAMAGE_CUT_X: f64 = 500.0;

/// Axis-aligned rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn square(side: f64) -> Self {
        Self::new(0.0, 0.0, side, side)
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        p.0 >= self.x0 && p.0 < self.x1 && p.1 >= self.y0 && p.1 < self.y1
    }

    fn is_valid(&self) -> bool {
        [self.x0, self.y0, self.x1, self.y1].iter().all(|v| v.is_finite()) && self.x1 > self.x0 && self.y1 > self.y0
    }
}

/// Homogeneous Poisson field: `N ~ Poisson(lambda)` points, each uniform in
/// `region`.
pub fn poisson_points(lambda: f64, region: Rect, seed: u64) -> Result<Vec<(f64, f64)>, SynthError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SynthError::InvalidLambda(lambda));
    }
    if !region.is_valid() {
        return Err(SynthError::InvalidRegion);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = Poisson::new(lambda)
        .map_err(|_| SynthError::InvalidLambda(lambda))?
        .sample(&mut rng) as usize;
    Ok((0..n)
        .map(|_| {
            (
                rng.random_range(region.x0..region.x1),
                rng.random_range(region.y0..region.y1),
            )
        })
        .collect())
}

/// Keeps the points with `x <= 500`, in order.
pub fn simulate_damage(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    simulate_damage_at(points, DAMAGE_CUT_X)
}

pub fn simulate_damage_at(points: &[(f64, f64)], cut_x: f64) -> Vec<(f64, f64)> {
    points.iter().copied().filter(|p| p.0 <= cut_x).collect()
}

use serde::{Deserialize, Serialize};

use super::gbdt::GbdtModel;
use super::MlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub phi: Vec<f64>,
    /// Expected margin over the background.
    pub base: f64,
}

/// Exact interventional Shapley values of `f` at `x`.
///
/// The value of a coalition is the mean of `f` over background rows with the
/// coalition's features taken from `x`. All `2^d` coalitions are evaluated,
/// so this is meant for a handful of features.
pub fn shapley_values(f: impl Fn(&[f64]) -> f64, x: &[f64], background: &[Vec<f64>]) -> Result<Attribution, MlError> {
    if background.is_empty() {
        return Err(MlError::EmptyBackground);
    }
    let d = x.len();
    if d > 16 {
        return Err(MlError::DimensionMismatch { expected: 16, got: d });
    }
    if background.iter().any(|r| r.len() != d) {
        return Err(MlError::DimensionMismatch { expected: d, got: 0 });
    }
    let n_coalitions = 1usize << d;
    let mut value = vec![0.0; n_coalitions];
    let mut row = vec![0.0; d];
    for (mask, v) in value.iter_mut().enumerate() {
        let mut sum = 0.0;
        for b in background {
            for j in 0..d {
                row[j] = if mask >> j & 1 == 1 { x[j] } else { b[j] };
            }
            sum += f(&row);
        }
        *v = sum / background.len() as f64;
    }

    let fact: Vec<f64> = (0..=d)
        .scan(1.0, |acc, k| {
            if k > 0 {
                *acc *= k as f64;
            }
            Some(*acc)
        })
        .collect();
    let mut phi = vec![0.0; d];
    for (i, p) in phi.iter_mut().enumerate() {
        for mask in 0..n_coalitions {
            if mask >> i & 1 == 1 {
                continue;
            }
            let s = (mask as u32).count_ones() as usize;
            let weight = fact[s] * fact[d - s - 1] / fact[d];
            *p += weight * (value[mask | 1 << i] - value[mask]);
        }
    }
    Ok(Attribution { phi, base: value[0] })
}

/// Shapley attribution of a boosted model's margin.
pub fn shapley(model: &GbdtModel, x: &[f64], background: &[Vec<f64>]) -> Result<Attribution, MlError> {
    if x.len() != model.n_features {
        return Err(MlError::DimensionMismatch {
            expected: model.n_features,
            got: x.len(),
        });
    }
    shapley_values(|r| model.margin(r), x, background)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_function_recovers_terms() {
        let f = |r: &[f64]| 2.0 * r[0] + 3.0 * r[1];
        let bg = vec![vec![0.0, 0.0, 5.0], vec![2.0, 2.0, 7.0]];
        let a = shapley_values(f, &[3.0, 1.0, 9.0], &bg).unwrap();
        // phi_j = w_j (x_j - mean_bg_j)
        assert!((a.phi[0] - 4.0).abs() < 1e-12);
        assert!((a.phi[1] + 0.0).abs() < 1e-12);
        assert_eq!(a.phi[2], 0.0);
        assert!((a.base - 5.0).abs() < 1e-12);
    }

    #[test]
    fn interaction_is_split_evenly() {
        let f = |r: &[f64]| r[0] * r[1];
        let a = shapley_values(f, &[1.0, 1.0], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(a.phi, vec![0.5, 0.5]);
    }

    #[test]
    fn x_equal_to_background_gives_zero() {
        let f = |r: &[f64]| r[0].sin() + r[1] * r[2];
        let x = vec![0.3, 1.2, -0.7];
        let a = shapley_values(f, &x, &[x.clone(), x.clone()]).unwrap();
        assert!(a.phi.iter().all(|&p| p == 0.0));
        assert!(shapley_values(f, &x, &[]).is_err());
    }
}

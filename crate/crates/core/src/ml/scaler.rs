use serde::{Deserialize, Serialize};

use super::MlError;

/// Per-feature standardization `(x - mean) / std` with population std.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_scaler(rows: &[Vec<f64>], names: &[&str]) -> Result<Scaler, MlError> {
    if rows.len() < 2 {
        return Err(MlError::TooFewRows {
            needed: 2,
            got: rows.len(),
        });
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(MlError::DimensionMismatch {
            expected: d,
            got: rows.iter().map(Vec::len).find(|&l| l != d).unwrap_or(0),
        });
    }
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for j in 0..d {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
        let s = var.sqrt();
        if !(s.is_finite() && s > 0.0) || rows.iter().all(|r| r[j] == rows[0][j]) {
            let name = names
                .get(j)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("feature {j}"));
            return Err(MlError::ConstantFeature(name));
        }
        mean[j] = m;
        std[j] = s;
    }
    Ok(Scaler { mean, std })
}

impl Scaler {
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, v)| (v - self.mean[j]) / self.std[j])
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    /// Undoes the scaling of feature `j`.
    pub fn inverse(&self, j: usize, v: f64) -> f64 {
        v * self.std[j] + self.mean[j]
    }
}

pub fn apply_scaler(scaler: &Scaler, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    scaler.transform(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_column() {
        let rows = vec![vec![1.0], vec![3.0]];
        let s = fit_scaler(&rows, &["a"]).unwrap();
        assert_eq!(apply_scaler(&s, &rows), vec![vec![-1.0], vec![1.0]]);
        assert_eq!(s.inverse(0, 1.0), 3.0);
    }

    #[test]
    fn standardized_data_unchanged() {
        let rows = vec![vec![-1.0, 1.0], vec![1.0, -1.0], vec![-1.0, -1.0], vec![1.0, 1.0]];
        let s = fit_scaler(&rows, &["a", "b"]).unwrap();
        let out = s.transform(&rows);
        for (a, b) in out.iter().flatten().zip(rows.iter().flatten()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_column_is_named() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        assert_eq!(
            fit_scaler(&rows, &["nnd_mm", "iso"]),
            Err(MlError::ConstantFeature("iso".into()))
        );
    }
}

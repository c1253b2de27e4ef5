use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MlError;

pub const DEFAULT_K: usize = 5;

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Oversamples the minority class of a binary problem up to the majority
/// count. Each synthetic row interpolates a random minority row towards one
/// of its `k` nearest minority neighbours (`k` capped at minority − 1).
/// Synthetic rows are appended after the originals.
pub fn smote(rows: &[Vec<f64>], labels: &[u8], k: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<u8>), MlError> {
    if rows.len() != labels.len() {
        return Err(MlError::DimensionMismatch {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let zeros = labels.len() - ones;
    if ones == 0 || zeros == 0 {
        return Err(MlError::SingleClass);
    }
    let mut out_rows = rows.to_vec();
    let mut out_labels = labels.to_vec();
    if ones == zeros {
        return Ok((out_rows, out_labels));
    }
    let minority_label = if ones < zeros { 1 } else { 0 };
    let minority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority_label).collect();
    if minority.len() < 2 {
        return Err(MlError::TooFewRows {
            needed: 2,
            got: minority.len(),
        });
    }
    let k = k.min(minority.len() - 1).max(1);

    let neighbours: Vec<Vec<usize>> = minority
        .iter()
        .map(|&i| {
            let mut others: Vec<usize> = minority.iter().copied().filter(|&j| j != i).collect();
            others.sort_by(|&a, &b| {
                dist2(&rows[i], &rows[a])
                    .total_cmp(&dist2(&rows[i], &rows[b]))
                    .then(a.cmp(&b))
            });
            others.truncate(k);
            others
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let need = ones.max(zeros) - minority.len();
    for _ in 0..need {
        let pick = rng.random_range(0..minority.len());
        let base = &rows[minority[pick]];
        let nn = &rows[neighbours[pick][rng.random_range(0..k)]];
        let u: f64 = rng.random();
        out_rows.push(base.iter().zip(nn).map(|(a, b)| a + u * (b - a)).collect());
        out_labels.push(minority_label);
    }
    Ok((out_rows, out_labels))
}

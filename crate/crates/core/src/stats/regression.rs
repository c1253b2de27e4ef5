use serde::{Deserialize, Serialize};

use super::descriptive::{mean, quantile};
use super::StatsError;
use crate::ml::Dataset;

/// Upper bound on reported VIF; reached when a feature is an exact linear
/// combination of the others.
pub const VIF_CAP: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub feature: String,
    pub vif: f64,
    /// Set when `R²` had to be clamped (exact or near-exact collinearity).
    pub capped: bool,
}

/// Coefficient of determination of the least-squares fit of `y` on
/// `columns` with an intercept. Columns that are (numerically) linear
/// combinations of earlier ones are skipped.
pub fn r_squared(y: &[f64], columns: &[Vec<f64>]) -> f64 {
    let n = y.len();
    let my = mean(y);
    let mut resid: Vec<f64> = y.iter().map(|v| v - my).collect();
    let sst: f64 = resid.iter().map(|v| v * v).sum();
    if sst == 0.0 {
        return 0.0;
    }
    // Modified Gram–Schmidt on the centered columns.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for col in columns {
        let mc = mean(col);
        let mut v: Vec<f64> = col.iter().map(|c| c - mc).collect();
        let norm0 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for q in &basis {
            let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            for i in 0..n {
                v[i] -= dot * q[i];
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= 1e-10 * norm0 {
            continue;
        }
        for a in v.iter_mut() {
            *a /= norm;
        }
        let dot: f64 = resid.iter().zip(&v).map(|(a, b)| a * b).sum();
        for i in 0..n {
            resid[i] -= dot * v[i];
        }
        basis.push(v);
    }
    let sse: f64 = resid.iter().map(|v| v * v).sum();
    1.0 - sse / sst
}

/// Variance inflation factor `1 / (1 - R²_j)` of each column of `rows`,
/// regressing column `j` on all others with an intercept.
pub fn vif(rows: &[Vec<f64>], names: &[&str]) -> Result<Vec<VifEntry>, StatsError> {
    let p = names.len();
    if p < 2 {
        return Err(StatsError::TooFewFeatures(p));
    }
    if rows.len() < p + 2 {
        return Err(StatsError::TooFewObservations {
            needed: p + 2,
            got: rows.len(),
        });
    }
    if rows.iter().any(|r| r.len() != p) {
        return Err(StatsError::RaggedRows);
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let columns: Vec<Vec<f64>> = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut out = Vec::with_capacity(p);
    for j in 0..p {
        let others: Vec<Vec<f64>> = (0..p).filter(|&k| k != j).map(|k| columns[k].clone()).collect();
        let constant = columns[j].iter().all(|&v| v == columns[j][0]);
        let r2 = if constant { 1.0 } else { r_squared(&columns[j], &others) };
        let limit = 1.0 - 1.0 / VIF_CAP;
        let capped = r2 >= limit;
        let vif = if capped { VIF_CAP } else { 1.0 / (1.0 - r2.max(0.0)) };
        out.push(VifEntry {
            feature: names[j].to_string(),
            vif,
            capped,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn ols_line(x: &[f64], y: &[f64]) -> Result<LineFit, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::RaggedRows);
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewObservations {
            needed: 3,
            got: x.len(),
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(StatsError::ConstantPredictor);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sst: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let r2 = if sst == 0.0 { 1.0 } else { 1.0 - sse / sst };
    Ok(LineFit {
        slope,
        intercept,
        r2,
        n: x.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumFit {
    pub stratum: String,
    /// Inclusive bounds of the stratifying variable inside this stratum.
    pub key_range: (f64, f64),
    pub n: usize,
    /// `None` when the stratum has fewer than 3 rows or a constant predictor.
    pub fit: Option<LineFit>,
}

/// Default percentile cuts on image resolution.
pub const DEFAULT_CUTS: (f64, f64) = (0.15, 0.85);

/// Splits rows at the `cuts` percentiles (type 7) of `key` into low
/// (`< lo`), middle (`lo..=hi`) and high (`> hi`) strata and fits `y ~ x` in
/// each.
pub fn stratified_ols_by(key: &[f64], x: &[f64], y: &[f64], cuts: (f64, f64)) -> Result<Vec<StratumFit>, StatsError> {
    if key.len() != x.len() || x.len() != y.len() {
        return Err(StatsError::RaggedRows);
    }
    if key.is_empty() {
        return Err(StatsError::TooFewObservations { needed: 1, got: 0 });
    }
    if !(0.0..=1.0).contains(&cuts.0) || !(0.0..=1.0).contains(&cuts.1) || cuts.0 > cuts.1 {
        return Err(StatsError::InvalidCuts(cuts.0, cuts.1));
    }
    let lo = quantile(key, cuts.0);
    let hi = quantile(key, cuts.1);
    let strata: [(&str, Box<dyn Fn(f64) -> bool>); 3] = [
        ("low", Box::new(move |k| k < lo)),
        ("middle", Box::new(move |k| k >= lo && k <= hi)),
        ("high", Box::new(move |k| k > hi)),
    ];
    Ok(strata
        .iter()
        .map(|(name, member)| {
            let idx: Vec<usize> = (0..key.len()).filter(|&i| member(key[i])).collect();
            let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            let ks: Vec<f64> = idx.iter().map(|&i| key[i]).collect();
            let key_range = if ks.is_empty() {
                (f64::NAN, f64::NAN)
            } else {
                (
                    ks.iter().copied().fold(f64::INFINITY, f64::min),
                    ks.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                )
            };
            StratumFit {
                stratum: name.to_string(),
                key_range,
                n: idx.len(),
                fit: ols_line(&xs, &ys).ok(),
            }
        })
        .collect())
}

/// `nnd ~ nitrate` within resolution strata.
pub fn stratified_ols(ds: &Dataset, cuts: (f64, f64)) -> Result<Vec<StratumFit>, StatsError> {
    let key: Vec<f64> = ds.records.iter().map(|r| r.resolution).collect();
    let x: Vec<f64> = ds.records.iter().map(|r| r.nitrate_ppm).collect();
    let y: Vec<f64> = ds.records.iter().map(|r| r.nnd).collect();
    stratified_ols_by(&key, &x, &y, cuts)
}

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::descriptive::average_ranks;
use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    KruskalWallis,
    MannWhitney,
    WilcoxonSignedRank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    TwoSided,
    /// The first sample (or the differences) tends to be larger.
    Greater,
    Less,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: Vec<usize>,
    pub method: Method,
}

/// A pairwise comparison with its Bonferroni-adjusted p-value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseResult {
    pub test: TestResult,
    pub p_adjusted: f64,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal is valid")
}

/// Upper-tail probability of the continuity-corrected deviation `dev / sigma`
/// in the requested direction(s).
fn normal_p(dev: f64, sigma: f64, alt: Alternative) -> f64 {
    if sigma <= 0.0 || !sigma.is_finite() {
        return 1.0;
    }
    let n = std_normal();
    let p = match alt {
        Alternative::TwoSided => {
            let z = ((dev.abs() - 0.5).max(0.0)) / sigma;
            2.0 * n.sf(z)
        }
        Alternative::Greater => n.sf((dev - 0.5) / sigma),
        Alternative::Less => n.cdf((dev + 0.5) / sigma),
    };
    p.clamp(0.0, 1.0)
}

fn tie_sum(ties: &[usize]) -> f64 {
    ties.iter().map(|&t| (t * t * t - t) as f64).sum()
}

/// Kruskal–Wallis H with tie correction; p from the chi-square distribution
/// with `groups - 1` degrees of freedom.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::TooFewGroups(groups.len()));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(StatsError::TooFewObservations {
            needed: 2,
            got: g.len(),
        });
    }
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    if all.len() < 5 {
        return Err(StatsError::TooFewObservations {
            needed: 5,
            got: all.len(),
        });
    }
    check_finite(&all)?;
    let n_total = all.len() as f64;
    let (ranks, ties) = average_ranks(&all);
    let n = groups.iter().map(Vec::len).collect();
    let correction = 1.0 - tie_sum(&ties) / (n_total.powi(3) - n_total);
    if correction <= 0.0 {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: 1.0,
            n,
            method: Method::KruskalWallis,
        });
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = (12.0 / (n_total * (n_total + 1.0)) * sum - 3.0 * (n_total + 1.0)) / correction;
    let h = h.max(0.0);
    let chi = ChiSquared::new((groups.len() - 1) as f64).expect("positive degrees of freedom");
    Ok(TestResult {
        statistic: h,
        p_value: chi.sf(h).clamp(0.0, 1.0),
        n,
        method: Method::KruskalWallis,
    })
}

fn check_finite(values: &[f64]) -> Result<(), StatsError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

/// Mann–Whitney U for two samples: normal approximation with tie and
/// continuity corrections. The statistic is the U of the first sample.
pub fn mann_whitney(a: &[f64], b: &[f64], alt: Alternative) -> Result<TestResult, StatsError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatsError::TooFewObservations {
                needed: 2,
                got: s.len(),
            });
        }
    }
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    check_finite(&all)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let n = n1 + n2;
    let (ranks, ties) = average_ranks(&all);
    let r1: f64 = ranks[..a.len()].iter().sum();
    let u1 = r1 - n1 * (n1 + 1.0) / 2.0;
    let mu = n1 * n2 / 2.0;
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_sum(&ties) / (n * (n - 1.0)));
    Ok(TestResult {
        statistic: u1,
        p_value: normal_p(u1 - mu, var.max(0.0).sqrt(), alt),
        n: vec![a.len(), b.len()],
        method: Method::MannWhitney,
    })
}

/// Two-sided Mann–Whitney tests for each pair, Bonferroni-adjusted by the
/// number of pairs.
pub fn mann_whitney_bonferroni(pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<Vec<PairwiseResult>, StatsError> {
    let m = pairs.len() as f64;
    pairs
        .iter()
        .map(|(a, b)| {
            let test = mann_whitney(a, b, Alternative::TwoSided)?;
            let p_adjusted = (test.p_value * m).min(1.0);
            Ok(PairwiseResult { test, p_adjusted })
        })
        .collect()
}

/// Minimum number of nonzero differences for the signed-rank test.
pub const WILCOXON_MIN_N: usize = 6;

/// Wilcoxon signed-rank test on paired differences, two-sided.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<TestResult, StatsError> {
    wilcoxon_signed_rank_with(diffs, Alternative::TwoSided)
}

/// Wilcoxon signed-rank test. Zero differences are dropped; ties in `|d|`
/// share average ranks and reduce the variance. The statistic is
/// `min(W+, W-)` for the two-sided test and `W+` otherwise.
pub fn wilcoxon_signed_rank_with(diffs: &[f64], alt: Alternative) -> Result<TestResult, StatsError> {
    check_finite(diffs)?;
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|&d| d != 0.0).collect();
    if nonzero.is_empty() {
        return Err(StatsError::DegeneratePairing);
    }
    if nonzero.len() < WILCOXON_MIN_N {
        return Err(StatsError::TooFewObservations {
            needed: WILCOXON_MIN_N,
            got: nonzero.len(),
        });
    }
    let n = nonzero.len() as f64;
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w_plus: f64 = nonzero
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let total = n * (n + 1.0) / 2.0;
    let w_minus = total - w_plus;
    let mu = total / 2.0;
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_sum(&ties) / 48.0;
    let statistic = match alt {
        Alternative::TwoSided => w_plus.min(w_minus),
        _ => w_plus,
    };
    Ok(TestResult {
        statistic,
        p_value: normal_p(w_plus - mu, var.max(0.0).sqrt(), alt),
        n: vec![nonzero.len()],
        method: Method::WilcoxonSignedRank,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kruskal_identical_groups() {
        let g = vec![vec![4.0, 4.0], vec![4.0, 4.0], vec![4.0, 4.0]];
        let r = kruskal_wallis(&g).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn kruskal_separated_groups() {
        let g = vec![vec![1.0, 2.0, 3.0], vec![11.0, 12.0, 13.0], vec![21.0, 22.0, 23.0]];
        assert!(kruskal_wallis(&g).unwrap().p_value < 0.05);
    }

    #[test]
    fn kruskal_hand_case() {
        // rank sums 3, 7, 11 over N = 6: H = 12/42 * (9 + 49 + 121)/2 - 21 = 32/7
        let g = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let r = kruskal_wallis(&g).unwrap();
        assert!((r.statistic - 32.0 / 7.0).abs() < 1e-12);
        // chi-square with 2 df has survival exp(-h/2)
        assert!((r.p_value - (-16.0f64 / 7.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn mann_whitney_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let r = mann_whitney_bonferroni(&[(a.to_vec(), a.to_vec())]).unwrap();
        assert!(r[0].test.p_value > 0.9);
        assert_eq!(r[0].p_adjusted, 1.0);

        let lo: Vec<f64> = (0..20).map(f64::from).collect();
        let hi: Vec<f64> = (100..120).map(f64::from).collect();
        let r = mann_whitney_bonferroni(&[(lo.clone(), hi.clone()), (lo, hi)]).unwrap();
        assert_eq!(r[0].test.statistic, 0.0);
        assert!(r[0].p_adjusted < 0.01);
        assert!((r[0].p_adjusted - 2.0 * r[0].test.p_value).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_cases() {
        let sym = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0];
        assert!(wilcoxon_signed_rank(&sym).unwrap().p_value >= 0.5);
        let pos: Vec<f64> = (1..=30).map(f64::from).collect();
        let r = wilcoxon_signed_rank(&pos).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(r.p_value < 0.001);
        assert_eq!(wilcoxon_signed_rank(&[0.0; 8]), Err(StatsError::DegeneratePairing));
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0, 0.0, 3.0]),
            Err(StatsError::TooFewObservations { .. })
        ));
        let one_sided = wilcoxon_signed_rank_with(&pos, Alternative::Greater).unwrap();
        assert!(one_sided.p_value < r.p_value);
        assert!(wilcoxon_signed_rank_with(&pos, Alternative::Less).unwrap().p_value > 0.99);
    }
}

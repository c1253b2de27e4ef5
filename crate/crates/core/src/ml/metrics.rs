use serde::{Deserialize, Serialize};

/// Counts indexed `[truth][predicted]`.
pub type Confusion = [[usize; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when `y_true` holds a single class.
    pub roc_auc: Option<f64>,
    pub pr_auc: Option<f64>,
    pub confusion: Confusion,
}

pub fn confusion(y_true: &[u8], labels: &[u8]) -> Confusion {
    let mut c = [[0usize; 2]; 2];
    for (&t, &p) in y_true.iter().zip(labels) {
        c[(t != 0) as usize][(p != 0) as usize] += 1;
    }
    c
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Score groups in ascending score order: (score, positives, negatives).
fn tie_groups(y_true: &[u8], scores: &[f64]) -> Vec<(f64, u64, u64)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut groups: Vec<(f64, u64, u64)> = Vec::new();
    for i in order {
        let pos = (y_true[i] != 0) as u64;
        match groups.last_mut() {
            Some(g) if g.0 == scores[i] => {
                g.1 += pos;
                g.2 += 1 - pos;
            }
            _ => groups.push((scores[i], pos, 1 - pos)),
        }
    }
    groups
}

/// Area under the ROC curve by the trapezoid rule over all distinct score
/// thresholds. Tied positive/negative pairs count one half, so the value
/// equals the Mann–Whitney `U / (n+ n-)`.
pub fn roc_auc(y_true: &[u8], scores: &[f64]) -> Option<f64> {
    let groups = tie_groups(y_true, scores);
    let n_pos: u64 = groups.iter().map(|g| g.1).sum();
    let n_neg: u64 = groups.iter().map(|g| g.2).sum();
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    // Twice the trapezoid area in units of 1 / (n+ n-), kept integral.
    let mut twice_area: u128 = 0;
    let mut neg_below: u128 = 0;
    for &(_, p, n) in &groups {
        twice_area += p as u128 * (2 * neg_below + n as u128);
        neg_below += n as u128;
    }
    Some(twice_area as f64 / (2 * n_pos as u128 * n_neg as u128) as f64)
}

/// ROC points `(fpr, tpr)` from the strictest threshold down, starting at
/// `(0, 0)`.
pub fn roc_curve(y_true: &[u8], scores: &[f64]) -> Vec<(f64, f64)> {
    let groups = tie_groups(y_true, scores);
    let n_pos: u64 = groups.iter().map(|g| g.1).sum();
    let n_neg: u64 = groups.iter().map(|g| g.2).sum();
    let mut pts = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    for &(_, p, n) in groups.iter().rev() {
        tp += p;
        fp += n;
        pts.push((ratio(fp as usize, n_neg as usize), ratio(tp as usize, n_pos as usize)));
    }
    pts
}

/// Precision-recall points `(recall, precision)`, one per distinct threshold
/// from the strictest down.
pub fn pr_curve(y_true: &[u8], scores: &[f64]) -> Vec<(f64, f64)> {
    let groups = tie_groups(y_true, scores);
    let n_pos: u64 = groups.iter().map(|g| g.1).sum();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut pts = Vec::with_capacity(groups.len());
    for &(_, p, n) in groups.iter().rev() {
        tp += p;
        fp += n;
        pts.push((
            ratio(tp as usize, n_pos as usize),
            ratio(tp as usize, (tp + fp) as usize),
        ));
    }
    pts
}

/// Area under the precision-recall curve with step interpolation:
/// `sum_k (R_k - R_{k-1}) P_k` over distinct thresholds.
pub fn pr_auc(y_true: &[u8], scores: &[f64]) -> Option<f64> {
    let n_pos = y_true.iter().filter(|&&t| t != 0).count();
    if n_pos == 0 || n_pos == y_true.len() {
        return None;
    }
    let mut prev_recall = 0.0;
    let mut area = 0.0;
    for (recall, precision) in pr_curve(y_true, scores) {
        area += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    Some(area)
}

/// Precision, recall and F1 of the positive class from hard labels, plus
/// both AUCs from the scores.
pub fn binary_metrics(y_true: &[u8], scores: &[f64], labels: &[u8]) -> BinaryMetrics {
    let c = confusion(y_true, labels);
    let (tp, fp, fn_) = (c[1][1], c[0][1], c[1][0]);
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    BinaryMetrics {
        precision,
        recall,
        f1,
        roc_auc: roc_auc(y_true, scores),
        pr_auc: pr_auc(y_true, scores),
        confusion: c,
    }
}

use serde::{Deserialize, Serialize};

use super::MlError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Binary log-loss on labels in {0, 1}.
    Logistic,
    /// Half squared error.
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub min_sum_hessian: f64,
    pub lambda: f64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_leaves: 31,
            min_samples_leaf: 20,
            min_sum_hessian: 1e-3,
            lambda: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Output already multiplied by the learning rate.
    Leaf { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    fn scale_leaves(&mut self, factor: f64) {
        for n in &mut self.nodes {
            if let Node::Leaf { value } = n {
                *value *= factor;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub objective: Objective,
    pub params: GbdtParams,
    pub base_score: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
    /// Mean training loss after each round (index 0 = base score only).
    pub train_loss: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub margin: f64,
    pub probability: f64,
    pub label: u8,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Per-row loss for a margin `z` and target `y`.
pub fn pointwise_loss(objective: Objective, z: f64, y: f64) -> f64 {
    match objective {
        // log(1 + e^z) - y z, written to avoid overflow
        Objective::Logistic => z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z,
        Objective::L2 => 0.5 * (z - y) * (z - y),
    }
}

/// First and second derivative of the pointwise loss with respect to `z`.
pub fn gradient_hessian(objective: Objective, z: f64, y: f64) -> (f64, f64) {
    match objective {
        Objective::Logistic => {
            let p = sigmoid(z);
            (p - y, p * (1.0 - p))
        }
        Objective::L2 => (z - y, 1.0),
    }
}

fn mean_loss(objective: Objective, margins: &[f64], y: &[f64]) -> f64 {
    margins
        .iter()
        .zip(y)
        .map(|(&z, &t)| pointwise_loss(objective, z, t))
        .sum::<f64>()
        / y.len() as f64
}

impl GbdtModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// Margins after `0, 1, ..., K` trees.
    pub fn staged_margins(&self, x: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.trees.len() + 1);
        let mut z = self.base_score;
        out.push(z);
        for t in &self.trees {
            z += t.predict(x);
            out.push(z);
        }
        out
    }

    /// Largest feature index used by any split, if any.
    pub fn max_split_feature(&self) -> Option<usize> {
        self.trees
            .iter()
            .flat_map(|t| t.nodes.iter())
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

/// Margin, probability and label (`p >= 0.5`) for one row.
pub fn gbdt_predict(model: &GbdtModel, x: &[f64]) -> Result<Prediction, MlError> {
    if x.len() != model.n_features {
        return Err(MlError::DimensionMismatch {
            expected: model.n_features,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(MlError::NonFinite);
    }
    let margin = model.margin(x);
    let probability = sigmoid(margin);
    Ok(Prediction {
        margin,
        probability,
        label: (probability >= 0.5) as u8,
    })
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    /// Number of rows (in this node's order for `feature`) going left.
    left_count: usize,
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
    n_features: usize,
}

/// A leaf under construction: its row indices sorted by every feature.
struct Pending {
    node: usize,
    sorted: Vec<Vec<usize>>,
    g: f64,
    h: f64,
    best: Option<Candidate>,
}

impl Grower<'_> {
    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.lambda)
    }

    fn best_split(&self, sorted: &[Vec<usize>], g: f64, h: f64) -> Option<Candidate> {
        let n = sorted[0].len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        if n < 2 * min_leaf {
            return None;
        }
        let parent = self.score(g, h);
        let mut best: Option<Candidate> = None;
        for (f, order) in sorted.iter().enumerate() {
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..n - 1 {
                let i = order[k];
                gl += self.grad[i];
                hl += self.hess[i];
                let left_n = k + 1;
                if left_n < min_leaf {
                    continue;
                }
                if n - left_n < min_leaf {
                    break;
                }
                let (v, next) = (self.x[i][f], self.x[order[k + 1]][f]);
                if v == next {
                    continue;
                }
                let (gr, hr) = (g - gl, h - hl);
                if hl < self.params.min_sum_hessian || hr < self.params.min_sum_hessian {
                    continue;
                }
                let gain = self.score(gl, hl) + self.score(gr, hr) - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mid = v + (next - v) / 2.0;
                    // guard against the midpoint rounding onto the right value
                    let threshold = if mid < next { mid } else { v };
                    best = Some(Candidate {
                        gain,
                        feature: f,
                        threshold,
                        left_count: left_n,
                    });
                }
            }
        }
        best
    }

    fn pending(&self, node: usize, sorted: Vec<Vec<usize>>) -> Pending {
        let g = sorted[0].iter().map(|&i| self.grad[i]).sum();
        let h = sorted[0].iter().map(|&i| self.hess[i]).sum();
        let best = self.best_split(&sorted, g, h);
        Pending {
            node,
            sorted,
            g,
            h,
            best,
        }
    }

    fn grow(&self, rows: &[usize]) -> Tree {
        let mut sorted = Vec::with_capacity(self.n_features);
        for f in 0..self.n_features {
            let mut order = rows.to_vec();
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            sorted.push(order);
        }
        let mut nodes = vec![Node::Leaf { value: 0.0 }];
        let mut leaves = vec![self.pending(0, sorted)];
        let mut n_leaves = 1;
        while n_leaves < self.params.max_leaves {
            // leaf with the largest gain; earliest leaf on ties
            let pick = leaves
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.best.as_ref().map(|b| (i, b.gain)))
                .fold(None, |acc: Option<(usize, f64)>, (i, g)| match acc {
                    Some((_, bg)) if bg >= g => acc,
                    _ => Some((i, g)),
                });
            let Some((idx, _)) = pick else { break };
            let leaf = leaves.swap_remove(idx);
            let cand = leaf.best.expect("picked leaf has a split");
            let left_set: Vec<bool> = {
                let mut mask = vec![false; self.x.len()];
                for &i in &leaf.sorted[cand.feature][..cand.left_count] {
                    mask[i] = true;
                }
                mask
            };
            let mut left_sorted = Vec::with_capacity(self.n_features);
            let mut right_sorted = Vec::with_capacity(self.n_features);
            for order in &leaf.sorted {
                let (l, r): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| left_set[i]);
                left_sorted.push(l);
                right_sorted.push(r);
            }
            let left = nodes.len();
            nodes.push(Node::Leaf { value: 0.0 });
            nodes.push(Node::Leaf { value: 0.0 });
            nodes[leaf.node] = Node::Split {
                feature: cand.feature,
                threshold: cand.threshold,
                left,
                right: left + 1,
            };
            leaves.push(self.pending(left, left_sorted));
            leaves.push(self.pending(left + 1, right_sorted));
            n_leaves += 1;
        }
        for leaf in &leaves {
            let value = -self.params.learning_rate * leaf.g / (leaf.h + self.params.lambda);
            nodes[leaf.node] = Node::Leaf {
                value: if value.is_finite() { value } else { 0.0 },
            };
        }
        Tree { nodes }
    }
}

/// Gradient boosting with second-order leaf-wise trees.
///
/// Each round fits one tree to the loss gradients and hessians at the
/// current margins. If a round would raise the mean training loss its leaf
/// values are halved until it does not (at most 30 times, then the tree is
/// dropped), so the recorded loss never increases.
pub fn gbdt_train(x: &[Vec<f64>], y: &[f64], objective: Objective, params: &GbdtParams) -> Result<GbdtModel, MlError> {
    if x.len() != y.len() {
        return Err(MlError::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let needed = 2 * params.min_samples_leaf.max(1);
    if x.len() < needed {
        return Err(MlError::TooFewRows { needed, got: x.len() });
    }
    let n_features = x[0].len();
    if n_features == 0 || x.iter().any(|r| r.len() != n_features) {
        return Err(MlError::DimensionMismatch {
            expected: n_features,
            got: 0,
        });
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(MlError::NonFinite);
    }
    if objective == Objective::Logistic && y.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(MlError::NonBinaryLabels);
    }

    let mean_y = y.iter().sum::<f64>() / y.len() as f64;
    let base_score = match objective {
        Objective::Logistic => {
            let p = mean_y.clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
        Objective::L2 => mean_y,
    };
    let rows: Vec<usize> = (0..x.len()).collect();
    let mut margins = vec![base_score; x.len()];
    let mut loss = mean_loss(objective, &margins, y);
    let mut train_loss = vec![loss];
    let mut trees = Vec::with_capacity(params.n_rounds);
    let mut grad = vec![0.0; x.len()];
    let mut hess = vec![0.0; x.len()];

    for _ in 0..params.n_rounds {
        for i in 0..x.len() {
            let (g, h) = gradient_hessian(objective, margins[i], y[i]);
            grad[i] = g;
            hess[i] = h;
        }
        let grower = Grower {
            x,
            grad: &grad,
            hess: &hess,
            params,
            n_features,
        };
        let mut tree = grower.grow(&rows);
        let deltas: Vec<f64> = x.iter().map(|r| tree.predict(r)).collect();
        let mut factor = 1.0;
        let mut accepted = None;
        for _ in 0..=30 {
            let trial: Vec<f64> = margins.iter().zip(&deltas).map(|(m, d)| m + factor * d).collect();
            let trial_loss = mean_loss(objective, &trial, y);
            if trial_loss <= loss {
                accepted = Some((trial, trial_loss));
                break;
            }
            factor *= 0.5;
        }
        if let Some((trial, trial_loss)) = accepted {
            if factor != 1.0 {
                tree.scale_leaves(factor);
            }
            margins = trial;
            loss = trial_loss;
            trees.push(tree);
        }
        train_loss.push(loss);
    }
    Ok(GbdtModel {
        objective,
        params: *params,
        base_score,
        n_features,
        trees,
        train_loss,
    })
}

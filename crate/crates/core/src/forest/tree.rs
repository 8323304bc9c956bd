use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::LabeledDataset;

pub const N_CLASSES: usize = 3;

/// Decision node. Rows with `x[feature_index] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature_index: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class_counts: [u32; N_CLASSES],
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn leaf(&self, x: &[f64]) -> &[u32; N_CLASSES] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class_counts } => return class_counts,
                TreeNode::Internal {
                    feature_index,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature_index] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// A candidate split and its size-weighted Gini impurity
/// `sum over children of n_child * gini(child)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature_index: usize,
    pub threshold: f64,
    pub weighted_gini: f64,
}

/// `n * gini = n - sum(c^2) / n` for a class-count vector.
pub(crate) fn weighted_gini(counts: &[u32; N_CLASSES]) -> f64 {
    let n: u32 = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c as f64) * (c as f64)).sum();
    n as f64 - sq / n as f64
}

/// A threshold in `[lo, hi)` that is exactly representable as `f32`, as
/// close to the midpoint as possible. Falls back to the midpoint when no such
/// `f32` exists.
pub fn split_threshold(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    let mut t = mid as f32;
    if (t as f64) < lo {
        t = t.next_up();
    }
    if (t as f64) >= hi {
        t = t.next_down();
    }
    if (t as f64) >= lo && (t as f64) < hi {
        t as f64
    } else {
        mid
    }
}

/// Exhaustive best split over `features` for rows `indices`. Ties keep the
/// earliest candidate in (feature, threshold) order.
pub fn find_best_split(
    data: &LabeledDataset,
    indices: &[usize],
    features: &[usize],
) -> Option<Split> {
    let mut totals = [0u32; N_CLASSES];
    for &i in indices {
        totals[data.labels[i].code() as usize] += 1;
    }
    let mut best: Option<Split> = None;
    let mut order: Vec<usize> = indices.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| data.rows[a][f].total_cmp(&data.rows[b][f]).then(a.cmp(&b)));
        let mut left = [0u32; N_CLASSES];
        for k in 0..order.len().saturating_sub(1) {
            left[data.labels[order[k]].code() as usize] += 1;
            let (lo, hi) = (data.rows[order[k]][f], data.rows[order[k + 1]][f]);
            if !(hi > lo) {
                continue;
            }
            let mut right = totals;
            for c in 0..N_CLASSES {
                right[c] -= left[c];
            }
            let score = weighted_gini(&left) + weighted_gini(&right);
            if best.is_none_or(|b| score < b.weighted_gini - 1e-12) {
                best = Some(Split {
                    feature_index: f,
                    threshold: split_threshold(lo, hi),
                    weighted_gini: score,
                });
            }
        }
    }
    best
}

/// Tree-growing limits.
#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    /// Features examined per node.
    pub max_features: usize,
}

/// Grows one tree on the (possibly repeated) row indices `sample`.
pub fn grow_tree<R: Rng>(
    data: &LabeledDataset,
    sample: &[usize],
    params: &TreeParams,
    rng: &mut R,
) -> TreeNode {
    grow(data, sample.to_vec(), 0, params, rng)
}

fn grow<R: Rng>(
    data: &LabeledDataset,
    indices: Vec<usize>,
    depth: usize,
    params: &TreeParams,
    rng: &mut R,
) -> TreeNode {
    let mut counts = [0u32; N_CLASSES];
    for &i in &indices {
        counts[data.labels[i].code() as usize] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if depth >= params.max_depth || pure || indices.len() < 2 {
        return TreeNode::Leaf {
            class_counts: counts,
        };
    }
    let n_features = data.n_features();
    let mtry = params.max_features.clamp(1, n_features);
    let mut features = if mtry == n_features {
        (0..n_features).collect::<Vec<_>>()
    } else {
        sample(rng, n_features, mtry).into_vec()
    };
    features.sort_unstable();

    let Some(split) = find_best_split(data, &indices, &features) else {
        return TreeNode::Leaf {
            class_counts: counts,
        };
    };
    let (left, right): (Vec<usize>, Vec<usize>) = indices
        .into_iter()
        .partition(|&i| data.rows[i][split.feature_index] <= split.threshold);
    TreeNode::Internal {
        feature_index: split.feature_index,
        threshold: split.threshold,
        left: Box::new(grow(data, left, depth + 1, params, rng)),
        right: Box::new(grow(data, right, depth + 1, params, rng)),
    }
}

/// `n` draws with replacement from `0..n`.
pub fn bootstrap_indices<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

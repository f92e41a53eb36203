//! CART tree structure and greedy growth on a weighted bootstrap sample.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// One node of a fitted tree. Children are indices into [`Tree::nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf_id: usize,
    },
}

/// A fitted tree: its split structure, per-leaf outputs, and the leaf every
/// training row (in-bag or out-of-bag) falls into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) n_leaves: usize,
    /// Row-major `n_leaves × output_width`.
    pub(crate) leaf_values: Vec<f64>,
    pub(crate) train_leaves: Vec<u32>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    /// Leaf output (bag mean, or class-frequency vector) for a leaf id.
    pub fn leaf_value(&self, leaf: usize, width: usize) -> &[f64] {
        &self.leaf_values[leaf * width..(leaf + 1) * width]
    }

    /// Leaf id of training row `i`.
    pub fn train_leaf(&self, i: usize) -> usize {
        self.train_leaves[i] as usize
    }

    /// Routes a row to its leaf; `value <= threshold` goes left.
    pub fn leaf_of(&self, row: ArrayView1<'_, f64>) -> usize {
        let mut node = 0;
        loop {
            match self.nodes[node] {
                Node::Leaf { leaf_id } => return leaf_id,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Same routing over a plain slice.
    pub fn leaf_of_slice(&self, row: &[f64]) -> usize {
        self.leaf_of(ArrayView1::from(row))
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Bagged output mean per leaf, accumulated over rows in ascending index order.
pub(crate) fn leaf_means(
    n_leaves: usize,
    train_leaves: &[u32],
    counts: &[u32],
    encoded_targets: &[f64],
    width: usize,
) -> Vec<f64> {
    let mut sums = vec![0.0; n_leaves * width];
    let mut weights = vec![0u64; n_leaves];
    for (j, (&leaf, &c)) in train_leaves.iter().zip(counts).enumerate() {
        if c == 0 {
            continue;
        }
        let leaf = leaf as usize;
        weights[leaf] += c as u64;
        for k in 0..width {
            sums[leaf * width + k] += c as f64 * encoded_targets[j * width + k];
        }
    }
    for leaf in 0..n_leaves {
        let w = weights[leaf];
        for k in 0..width {
            // a leaf with no bagged rows only arises in hand-built forests
            sums[leaf * width + k] = if w == 0 { 0.0 } else { sums[leaf * width + k] / w as f64 };
        }
    }
    sums
}

pub(crate) struct GrowConfig {
    pub max_depth: Option<usize>,
    pub n_candidate_features: usize,
    pub min_samples_leaf: u64,
}

#[derive(Clone, Copy)]
struct Sample {
    idx: u32,
    weight: u32,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Grows a tree on the in-bag rows. Splits are scanned exhaustively over
/// midpoints of sorted distinct values; among equal scores the lowest feature
/// index, then lowest threshold, wins. Returns the node list and leaf count.
pub(crate) fn grow<R: Rng>(
    features: ArrayView2<'_, f64>,
    encoded_targets: &[f64],
    width: usize,
    counts: &[u32],
    cfg: &GrowConfig,
    rng: &mut R,
) -> (Vec<Node>, usize) {
    let n_features = features.ncols();
    let mut samples: Vec<Sample> = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(idx, &c)| Sample {
            idx: idx as u32,
            weight: c,
        })
        .collect();

    let mut nodes = vec![Node::Leaf { leaf_id: 0 }];
    let mut n_leaves = 0;
    // (node id, sample range, depth); left children are popped first
    let mut stack = vec![(0usize, 0usize, samples.len(), 0usize)];
    let mut scratch: Vec<(f64, Sample)> = Vec::new();

    while let Some((node_id, start, end, depth)) = stack.pop() {
        let node_samples = &mut samples[start..end];
        let split = if cfg.max_depth.is_none_or(|d| depth < d) {
            best_split(
                features,
                encoded_targets,
                width,
                node_samples,
                n_features,
                cfg,
                rng,
                &mut scratch,
            )
        } else {
            None
        };

        match split {
            Some(BestSplit {
                feature, threshold, ..
            }) => {
                let mid = partition(node_samples, |s| {
                    features[[s.idx as usize, feature]] <= threshold
                });
                let left = nodes.len();
                nodes.push(Node::Leaf { leaf_id: 0 });
                nodes.push(Node::Leaf { leaf_id: 0 });
                nodes[node_id] = Node::Split {
                    feature,
                    threshold,
                    left,
                    right: left + 1,
                };
                stack.push((left + 1, start + mid, end, depth + 1));
                stack.push((left, start, start + mid, depth + 1));
            }
            None => {
                nodes[node_id] = Node::Leaf { leaf_id: n_leaves };
                n_leaves += 1;
            }
        }
    }
    (nodes, n_leaves)
}

/// Stable partition; returns the size of the `true` side.
fn partition(samples: &mut [Sample], pred: impl Fn(&Sample) -> bool) -> usize {
    let (left, right): (Vec<Sample>, Vec<Sample>) = samples.iter().partition(|s| pred(s));
    let mid = left.len();
    samples[..mid].copy_from_slice(&left);
    samples[mid..].copy_from_slice(&right);
    mid
}

#[allow(clippy::too_many_arguments)]
fn best_split<R: Rng>(
    features: ArrayView2<'_, f64>,
    y: &[f64],
    width: usize,
    samples: &[Sample],
    n_features: usize,
    cfg: &GrowConfig,
    rng: &mut R,
    scratch: &mut Vec<(f64, Sample)>,
) -> Option<BestSplit> {
    let total_w: u64 = samples.iter().map(|s| s.weight as u64).sum();
    if total_w < 2 * cfg.min_samples_leaf {
        return None;
    }
    let mut total_sum = vec![0.0; width];
    for s in samples {
        for k in 0..width {
            total_sum[k] += s.weight as f64 * y[s.idx as usize * width + k];
        }
    }
    // Maximizing Σ_k S_k²/W over both children is equivalent to minimizing the
    // weighted SSE (regression) or weighted Gini impurity (one-hot classes).
    let parent_score = total_sum.iter().map(|s| s * s).sum::<f64>() / total_w as f64;

    let mut candidates: Vec<usize> = if cfg.n_candidate_features >= n_features {
        (0..n_features).collect()
    } else {
        index::sample(rng, n_features, cfg.n_candidate_features).into_vec()
    };
    candidates.sort_unstable();

    let mut best: Option<BestSplit> = None;
    let mut left_sum = vec![0.0; width];
    for &f in &candidates {
        scratch.clear();
        scratch.extend(samples.iter().map(|&s| (features[[s.idx as usize, f]], s)));
        scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.idx.cmp(&b.1.idx)));
        if scratch[0].0 == scratch[scratch.len() - 1].0 {
            continue;
        }
        left_sum.iter_mut().for_each(|v| *v = 0.0);
        let mut left_w: u64 = 0;
        for pos in 0..scratch.len() - 1 {
            let (x, s) = scratch[pos];
            left_w += s.weight as u64;
            for k in 0..width {
                left_sum[k] += s.weight as f64 * y[s.idx as usize * width + k];
            }
            let next_x = scratch[pos + 1].0;
            if next_x == x {
                continue;
            }
            let right_w = total_w - left_w;
            if left_w < cfg.min_samples_leaf || right_w < cfg.min_samples_leaf {
                continue;
            }
            let mut score = 0.0;
            for k in 0..width {
                let r = total_sum[k] - left_sum[k];
                score += left_sum[k] * left_sum[k] / left_w as f64 + r * r / right_w as f64;
            }
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mut threshold = x + (next_x - x) / 2.0;
                if threshold >= next_x {
                    threshold = x;
                }
                best = Some(BestSplit {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
    }
    best.filter(|b| b.score - parent_score > 1e-12 * parent_score.abs().max(1e-300))
}

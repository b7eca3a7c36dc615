//! Histogram-based tree growing and boosting.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::Dataset;
use crate::gbdt::{GbdtParams, Model, Node, Tree};
use crate::util::sigmoid;

const EPS_PROB: f64 = 1e-12;
const MIN_SPLIT_GAIN: f64 = 1e-12;

/// Per-feature bin thresholds. A row falls into bin `b` where
/// `thresholds[b-1] < x <= thresholds[b]`; splitting "after bin b" sends
/// `x <= thresholds[b]` left. When the number of distinct values fits in the
/// bin budget, thresholds are midpoints between consecutive distinct values,
/// so histogram split search is exhaustive over candidate cuts.
pub(crate) struct Binner {
    thresholds: Vec<Vec<f64>>,
}

impl Binner {
    pub(crate) fn fit(dataset: &Dataset, max_bins: usize) -> Binner {
        let n_cols = dataset.n_cols();
        let thresholds = (0..n_cols)
            .into_par_iter()
            .map(|f| {
                let mut values: Vec<f64> = (0..dataset.n_rows())
                    .map(|r| dataset.row(r)[f])
                    .collect();
                values.sort_by(f64::total_cmp);
                values.dedup();
                if values.len() <= 1 {
                    return Vec::new();
                }
                if values.len() <= max_bins {
                    values
                        .windows(2)
                        .map(|w| w[0] + (w[1] - w[0]) / 2.0)
                        .collect()
                } else {
                    // Quantile cuts over distinct values.
                    let mut cuts = Vec::with_capacity(max_bins - 1);
                    for k in 1..max_bins {
                        let idx = k * (values.len() - 1) / max_bins;
                        let cut = values[idx] + (values[idx + 1] - values[idx]) / 2.0;
                        cuts.push(cut);
                    }
                    cuts.dedup();
                    cuts
                }
            })
            .collect();
        Binner { thresholds }
    }

    pub(crate) fn n_bins(&self, feature: usize) -> usize {
        self.thresholds[feature].len() + 1
    }

    pub(crate) fn threshold(&self, feature: usize, bin: usize) -> f64 {
        self.thresholds[feature][bin]
    }

    pub(crate) fn bin(&self, feature: usize, value: f64) -> u16 {
        self.thresholds[feature].partition_point(|t| *t < value) as u16
    }
}

#[derive(Clone, Copy, Default)]
struct BinStats {
    grad: f64,
    hess: f64,
    count: usize,
}

struct SplitCandidate {
    gain: f64,
    feature: usize,
    bin: usize,
    left_grad: f64,
    left_hess: f64,
    left_count: usize,
}

fn leaf_objective(grad: f64, hess: f64, l2: f64) -> f64 {
    grad * grad / (hess + l2)
}

/// Newton-step leaf value under weighted logistic loss.
pub(crate) fn leaf_value(grad: f64, hess: f64, l2: f64) -> f64 {
    -grad / (hess + l2)
}

fn best_split_for_feature(
    feature: usize,
    rows: &[u32],
    binned: &[Vec<u16>],
    grad: &[f64],
    hess: &[f64],
    total_grad: f64,
    total_hess: f64,
    n_bins: usize,
    params: &GbdtParams,
) -> Option<SplitCandidate> {
    if n_bins < 2 {
        return None;
    }
    let mut hist = vec![BinStats::default(); n_bins];
    let bins = &binned[feature];
    for &r in rows {
        let b = bins[r as usize] as usize;
        hist[b].grad += grad[r as usize];
        hist[b].hess += hess[r as usize];
        hist[b].count += 1;
    }

    let l2 = params.l2_leaf_regularization;
    let parent = leaf_objective(total_grad, total_hess, l2);
    let mut best: Option<SplitCandidate> = None;
    let mut left = BinStats::default();
    for b in 0..n_bins - 1 {
        left.grad += hist[b].grad;
        left.hess += hist[b].hess;
        left.count += hist[b].count;
        let right_count = rows.len() - left.count;
        if left.count < params.min_samples_leaf || right_count < params.min_samples_leaf {
            continue;
        }
        let right_grad = total_grad - left.grad;
        let right_hess = total_hess - left.hess;
        let gain = 0.5
            * (leaf_objective(left.grad, left.hess, l2)
                + leaf_objective(right_grad, right_hess, l2)
                - parent);
        let better = match &best {
            None => gain > MIN_SPLIT_GAIN,
            Some(cur) => gain > cur.gain,
        };
        if better {
            best = Some(SplitCandidate {
                gain,
                feature,
                bin: b,
                left_grad: left.grad,
                left_hess: left.hess,
                left_count: left.count,
            });
        }
    }
    best
}

/// Total order for reducing per-feature candidates: higher gain first, then
/// lower feature index, then lower bin. Keeps parallel reduction
/// deterministic.
fn prefer(a: SplitCandidate, b: SplitCandidate) -> SplitCandidate {
    if (b.gain, a.feature, a.bin) > (a.gain, b.feature, b.bin) {
        b
    } else {
        a
    }
}

struct NodeBuild {
    node_index: usize,
    rows: Vec<u32>,
    grad_sum: f64,
    hess_sum: f64,
    depth: usize,
}

fn grow_tree(
    binned: &[Vec<u16>],
    dataset: &Dataset,
    binner: &Binner,
    grad: &[f64],
    hess: &[f64],
    params: &GbdtParams,
) -> Tree {
    let n_rows = dataset.n_rows();
    let all_rows: Vec<u32> = (0..n_rows as u32).collect();
    let total_grad: f64 = grad.iter().sum();
    let total_hess: f64 = hess.iter().sum();

    let mut nodes: Vec<Node> = vec![Node::Leaf { value: 0.0 }];
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(NodeBuild {
        node_index: 0,
        rows: all_rows,
        grad_sum: total_grad,
        hess_sum: total_hess,
        depth: 0,
    });
    let mut leaves = 1usize;
    let l2 = params.l2_leaf_regularization;

    while let Some(build) = queue.pop_front() {
        let can_split = build.depth < params.max_depth
            && build.rows.len() >= 2 * params.min_samples_leaf
            && leaves < params.max_leaves;
        let candidate = if can_split {
            (0..dataset.n_cols())
                .into_par_iter()
                .filter_map(|f| {
                    best_split_for_feature(
                        f,
                        &build.rows,
                        binned,
                        grad,
                        hess,
                        build.grad_sum,
                        build.hess_sum,
                        binner.n_bins(f),
                        params,
                    )
                })
                .reduce_with(prefer)
        } else {
            None
        };

        match candidate {
            None => {
                nodes[build.node_index] = Node::Leaf {
                    value: leaf_value(build.grad_sum, build.hess_sum, l2),
                };
            }
            Some(split) => {
                let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
                for &r in &build.rows {
                    if binned[split.feature][r as usize] as usize <= split.bin {
                        left_rows.push(r);
                    } else {
                        right_rows.push(r);
                    }
                }
                debug_assert_eq!(left_rows.len(), split.left_count);
                let left_index = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                let right_index = nodes.len();
                nodes.push(Node::Leaf { value: 0.0 });
                nodes[build.node_index] = Node::Split {
                    feature: split.feature,
                    threshold: binner.threshold(split.feature, split.bin),
                    left: left_index,
                    right: right_index,
                    gain: split.gain,
                    cover: build.hess_sum,
                };
                leaves += 1;
                queue.push_back(NodeBuild {
                    node_index: left_index,
                    rows: left_rows,
                    grad_sum: split.left_grad,
                    hess_sum: split.left_hess,
                    depth: build.depth + 1,
                });
                queue.push_back(NodeBuild {
                    node_index: right_index,
                    rows: right_rows,
                    grad_sum: build.grad_sum - split.left_grad,
                    hess_sum: build.hess_sum - split.left_hess,
                    depth: build.depth + 1,
                });
            }
        }
    }
    Tree { nodes }
}

/// Trains a boosted model on a weighted binary dataset.
pub fn train(dataset: &Dataset, params: &GbdtParams) -> Result<Model> {
    params.validate()?;
    if dataset.n_rows() == 0 {
        return Err(Error::DegenerateLabels("empty dataset".to_string()));
    }
    let has_pos = dataset.labels.iter().any(|&y| y == 1);
    let has_neg = dataset.labels.iter().any(|&y| y == 0);
    if !has_pos || !has_neg {
        return Err(Error::DegenerateLabels(
            "training requires both classes".to_string(),
        ));
    }

    let n = dataset.n_rows();
    let weight_sum: f64 = dataset.weights.iter().sum();
    let positive_weight: f64 = dataset
        .weights
        .iter()
        .zip(&dataset.labels)
        .filter(|(_, &y)| y == 1)
        .map(|(w, _)| w)
        .sum();
    let prior = (positive_weight / weight_sum).clamp(EPS_PROB, 1.0 - EPS_PROB);
    let base_score = (prior / (1.0 - prior)).ln();

    let binner = Binner::fit(dataset, params.num_histogram_bins);
    let binned: Vec<Vec<u16>> = (0..dataset.n_cols())
        .into_par_iter()
        .map(|f| {
            (0..n)
                .map(|r| binner.bin(f, dataset.row(r)[f]))
                .collect()
        })
        .collect();

    let mut margins = vec![base_score; n];
    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];
    let mut trees = Vec::with_capacity(params.num_trees);

    for _ in 0..params.num_trees {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            let w = dataset.weights[i];
            grad[i] = w * (p - f64::from(dataset.labels[i]));
            hess[i] = w * (p * (1.0 - p)).max(1e-16);
        }
        let tree = grow_tree(&binned, dataset, &binner, &grad, &hess, params);
        for i in 0..n {
            margins[i] += params.learning_rate * tree.output(dataset.row(i));
        }
        trees.push(tree);
    }

    Ok(Model {
        base_score,
        learning_rate: params.learning_rate,
        trees,
        feature_names: dataset.feature_names.clone(),
        params: params.clone(),
    })
}

// SPDX-License-Identifier: Apache-2.0

//! Second-order gradient boosting on the logistic loss with exact greedy
//! split search. Trees are grown level by level over presorted columns, so
//! one pass per feature finds the best split for every open node.

use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, Node};
use super::{check_trainable, logistic, EnsembleKind, TreeEnsembleModel};
use crate::error::{Error, Result};
use crate::phonofeatures::FeatureMatrix;

const MIN_SPLIT_GAIN: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Weight applied to positive samples; `None` means N_neg / N_pos.
    pub scale_pos_weight: Option<f64>,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    /// Minimum hessian sum per child.
    pub min_child_weight: f64,
    /// Recorded for reproducibility; training itself has no random steps.
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_trees: 300,
            max_depth: 4,
            learning_rate: 0.05,
            scale_pos_weight: None,
            lambda: 1.0,
            min_child_weight: 1.0,
            seed: 0,
        }
    }
}

/// Negative-to-positive ratio, the default positive-sample weight.
pub fn auto_scale_pos_weight(positives: usize, negatives: usize) -> f64 {
    negatives as f64 / positives as f64
}

pub fn train_gbt(m: &FeatureMatrix, params: &GbtParams) -> Result<TreeEnsembleModel> {
    train_gbt_with_history(m, params).map(|(model, _)| model)
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn weighted_logloss(raw: &[f64], labels: &[bool], w: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut wsum = 0.0;
    for ((f, y), wi) in raw.iter().zip(labels).zip(w) {
        let l = softplus(*f) - if *y { *f } else { 0.0 };
        total += wi * l;
        wsum += wi;
    }
    total / wsum
}

/// Trains and also returns the weighted training log-loss before the first
/// round and after each round.
pub fn train_gbt_with_history(
    m: &FeatureMatrix,
    params: &GbtParams,
) -> Result<(TreeEnsembleModel, Vec<f64>)> {
    let (pos, neg) = check_trainable(m)?;
    if params.lambda < 0.0 || params.learning_rate <= 0.0 {
        return Err(Error::Config(
            "lambda must be >= 0 and learning_rate > 0".into(),
        ));
    }
    let spw = params
        .scale_pos_weight
        .unwrap_or_else(|| auto_scale_pos_weight(pos, neg));
    let n = m.n_rows();
    let d = m.n_cols();
    let labels = &m.labels;
    let weights: Vec<f64> = labels.iter().map(|&y| if y { spw } else { 1.0 }).collect();
    let wpos: f64 = spw * pos as f64;
    let base_score = (wpos / neg as f64).ln();

    let sorted: Vec<Vec<usize>> = (0..d)
        .map(|j| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| m.value(a, j).total_cmp(&m.value(b, j)));
            idx
        })
        .collect();

    let mut raw = vec![base_score; n];
    let mut history = Vec::with_capacity(params.n_trees + 1);
    history.push(weighted_logloss(&raw, labels, &weights));
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..params.n_trees {
        for i in 0..n {
            let p = logistic(raw[i]);
            let y = if labels[i] { 1.0 } else { 0.0 };
            grad[i] = weights[i] * (p - y);
            hess[i] = weights[i] * p * (1.0 - p);
        }
        let (tree, leaf_of) = grow_tree(m, &sorted, &grad, &hess, &weights, params);
        for i in 0..n {
            if let Node::Leaf { value, .. } = tree.nodes[leaf_of[i]] {
                raw[i] += params.learning_rate * value;
            }
        }
        trees.push(tree);
        history.push(weighted_logloss(&raw, labels, &weights));
    }

    Ok((
        TreeEnsembleModel {
            kind: EnsembleKind::Gbt,
            trees,
            learning_rate: params.learning_rate,
            base_score,
            feature_names: m.names.clone(),
        },
        history,
    ))
}

#[derive(Clone, Copy)]
struct OpenNode {
    node: usize,
    g: f64,
    h: f64,
    cover: f64,
}

#[derive(Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

#[derive(Clone, Copy, Default)]
struct Scan {
    gl: f64,
    hl: f64,
    last: Option<f64>,
}

const CLOSED: usize = usize::MAX;

fn grow_tree(
    m: &FeatureMatrix,
    sorted: &[Vec<usize>],
    grad: &[f64],
    hess: &[f64],
    weights: &[f64],
    params: &GbtParams,
) -> (DecisionTree, Vec<usize>) {
    let n = m.n_rows();
    let lambda = params.lambda;
    let leaf_value = |g: f64, h: f64| -g / (h + lambda);
    let score = |g: f64, h: f64| g * g / (h + lambda);

    let mut nodes = vec![Node::Leaf { value: 0.0, cover: None }];
    // index into `open` per sample, CLOSED once its node became a leaf
    let mut open_of = vec![0usize; n];
    // tree node per sample
    let mut node_of = vec![0usize; n];
    let mut open = vec![OpenNode {
        node: 0,
        g: grad.iter().sum(),
        h: hess.iter().sum(),
        cover: weights.iter().sum(),
    }];

    for _depth in 0..params.max_depth {
        if open.is_empty() {
            break;
        }
        let mut best: Vec<Option<Candidate>> = vec![None; open.len()];
        for (j, order) in sorted.iter().enumerate() {
            let mut scans = vec![Scan::default(); open.len()];
            for &i in order {
                let o = open_of[i];
                if o == CLOSED {
                    continue;
                }
                let x = m.value(i, j);
                let s = &mut scans[o];
                if let Some(prev) = s.last {
                    if x > prev {
                        let on = &open[o];
                        let hr = on.h - s.hl;
                        if s.hl >= params.min_child_weight && hr >= params.min_child_weight {
                            let gr = on.g - s.gl;
                            let gain = 0.5
                                * (score(s.gl, s.hl) + score(gr, hr) - score(on.g, on.h));
                            let better = match best[o] {
                                None => gain > MIN_SPLIT_GAIN,
                                Some(b) => gain > b.gain,
                            };
                            if better {
                                let mut threshold = prev + (x - prev) / 2.0;
                                if threshold >= x {
                                    threshold = prev;
                                }
                                best[o] = Some(Candidate {
                                    feature: j,
                                    threshold,
                                    gain,
                                });
                            }
                        }
                    }
                }
                s.gl += grad[i];
                s.hl += hess[i];
                s.last = Some(x);
            }
        }

        // Allocate children for split nodes; close the rest as leaves.
        let mut child_slot = vec![(CLOSED, CLOSED); open.len()];
        let mut next_open = Vec::new();
        for (o, on) in open.iter().enumerate() {
            match best[o] {
                Some(c) => {
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(Node::Leaf { value: 0.0, cover: None });
                    nodes.push(Node::Leaf { value: 0.0, cover: None });
                    nodes[on.node] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left,
                        right,
                        cover: Some(on.cover),
                    };
                    child_slot[o] = (next_open.len(), next_open.len() + 1);
                    for node in [left, right] {
                        next_open.push(OpenNode { node, g: 0.0, h: 0.0, cover: 0.0 });
                    }
                }
                None => {
                    nodes[on.node] = Node::Leaf {
                        value: leaf_value(on.g, on.h),
                        cover: Some(on.cover),
                    };
                }
            }
        }
        for i in 0..n {
            let o = open_of[i];
            if o == CLOSED {
                continue;
            }
            match best[o] {
                Some(c) => {
                    let (l, r) = child_slot[o];
                    let slot = if m.value(i, c.feature) <= c.threshold { l } else { r };
                    open_of[i] = slot;
                    let on = &mut next_open[slot];
                    on.g += grad[i];
                    on.h += hess[i];
                    on.cover += weights[i];
                    node_of[i] = on.node;
                }
                None => open_of[i] = CLOSED,
            }
        }
        open = next_open;
    }
    for on in &open {
        nodes[on.node] = Node::Leaf {
            value: leaf_value(on.g, on.h),
            cover: Some(on.cover),
        };
    }
    (DecisionTree::new(nodes), node_of)
}

// SPDX-License-Identifier: Apache-2.0

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, Node};
use super::{check_trainable, class_weights, ClassWeighting, EnsembleKind, TreeEnsembleModel};
use crate::error::{Error, Result};
use crate::phonofeatures::FeatureMatrix;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// floor(sqrt(d)), at least 1.
    #[default]
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, d: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Minimum distinct training rows per leaf.
    pub min_leaf: usize,
    pub class_weighting: ClassWeighting,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            min_leaf: 5,
            class_weighting: ClassWeighting::Balanced,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestFit {
    pub model: TreeEnsembleModel,
    /// Mean prediction over the trees for which the row was out of bag.
    pub oob_scores: Vec<Option<f64>>,
}

pub fn train_forest(m: &FeatureMatrix, params: &ForestParams) -> Result<ForestFit> {
    check_trainable(m)?;
    if params.n_trees == 0 || params.min_leaf == 0 {
        return Err(Error::Config("forest needs n_trees >= 1 and min_leaf >= 1".into()));
    }
    let n = m.n_rows();
    let cw = class_weights(&m.labels, params.class_weighting);
    let mtry = params.max_features.resolve(m.n_cols());

    let grown: Vec<(DecisionTree, Vec<u32>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(t as u64);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.gen_range(0..n)] += 1;
            }
            let rows: Vec<usize> = (0..n).filter(|&i| counts[i] > 0).collect();
            let weights: Vec<f64> = (0..n).map(|i| cw[i] * counts[i] as f64).collect();
            let mut b = Builder {
                m,
                weights: &weights,
                params,
                mtry,
                rng,
                nodes: Vec::new(),
            };
            b.grow(rows, 0);
            (DecisionTree::new(b.nodes), counts)
        })
        .collect();

    let mut sum = vec![0.0; n];
    let mut hits = vec![0u32; n];
    let mut trees = Vec::with_capacity(grown.len());
    for (tree, counts) in grown {
        for i in 0..n {
            if counts[i] == 0 {
                sum[i] += tree.predict(m.row(i));
                hits[i] += 1;
            }
        }
        trees.push(tree);
    }
    let oob_scores = sum
        .iter()
        .zip(&hits)
        .map(|(s, &h)| (h > 0).then(|| s / h as f64))
        .collect();
    Ok(ForestFit {
        model: TreeEnsembleModel {
            kind: EnsembleKind::Forest,
            trees,
            learning_rate: 1.0,
            base_score: 0.0,
            feature_names: m.names.clone(),
        },
        oob_scores,
    })
}

struct Builder<'a> {
    m: &'a FeatureMatrix,
    weights: &'a [f64],
    params: &'a ForestParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct Best {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

fn gini_term(w: f64, w1: f64) -> f64 {
    // w * gini = w * (1 - p1² - p0²) = 2 * w1 * w0 / w
    if w <= 0.0 {
        0.0
    } else {
        2.0 * w1 * (w - w1) / w
    }
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0, cover: None });
        let (w, w1) = rows.iter().fold((0.0, 0.0), |(w, w1), &i| {
            let wi = self.weights[i];
            (w + wi, if self.m.labels[i] { w1 + wi } else { w1 })
        });
        let pure = w1 <= 0.0 || w1 >= w;
        let depth_done = self.params.max_depth.is_some_and(|d| depth >= d);
        let split = if pure || depth_done || rows.len() < 2 * self.params.min_leaf {
            None
        } else {
            self.find_split(&rows, w, w1)
        };
        match split {
            None => {
                self.nodes[id] = Node::Leaf {
                    value: if w > 0.0 { w1 / w } else { 0.0 },
                    cover: Some(w),
                };
            }
            Some(b) => {
                let (l, r): (Vec<usize>, Vec<usize>) = rows
                    .iter()
                    .partition(|&&i| self.m.value(i, b.feature) <= b.threshold);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = Node::Split {
                    feature: b.feature,
                    threshold: b.threshold,
                    left,
                    right,
                    cover: Some(w),
                };
            }
        }
        id
    }

    /// Tries `mtry` random features, then keeps drawing until one splits.
    fn find_split(&mut self, rows: &[usize], w: f64, w1: f64) -> Option<Best> {
        let mut features: Vec<usize> = (0..self.m.n_cols()).collect();
        features.shuffle(&mut self.rng);
        let parent = gini_term(w, w1);
        let mut best: Option<Best> = None;
        let mut sorted = rows.to_vec();
        for (tried, &j) in features.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.m.value(a, j).total_cmp(&self.m.value(b, j)));
            let min_leaf = self.params.min_leaf;
            let (mut wl, mut w1l) = (0.0, 0.0);
            for k in 0..sorted.len() - 1 {
                let i = sorted[k];
                wl += self.weights[i];
                if self.m.labels[i] {
                    w1l += self.weights[i];
                }
                let x = self.m.value(i, j);
                let next = self.m.value(sorted[k + 1], j);
                if next <= x || k + 1 < min_leaf || sorted.len() - k - 1 < min_leaf {
                    continue;
                }
                let decrease = parent - gini_term(wl, w1l) - gini_term(w - wl, w1 - w1l);
                if decrease > 1e-12 && best.as_ref().is_none_or(|b| decrease > b.decrease) {
                    let mut threshold = x + (next - x) / 2.0;
                    if threshold >= next {
                        threshold = x;
                    }
                    best = Some(Best { feature: j, threshold, decrease });
                }
            }
        }
        best
    }
}

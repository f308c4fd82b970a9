// SPDX-License-Identifier: Apache-2.0

//! Shapley attributions for tree ensembles on the raw (log-odds) scale.
//!
//! [`tree_shap`] is the path-dependent polynomial-time algorithm, using node
//! covers as the background distribution. [`sampled_shapley`] is a slow
//! permutation estimator of interventional values, kept as a cross-check.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{DecisionTree, Node, TreeEnsembleModel};
use crate::phonofeatures::FeatureMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub instance: String,
    pub base_value: f64,
    pub contributions: Vec<f64>,
}

impl Attribution {
    /// `base_value + Σ contributions`, which equals the raw score.
    pub fn total(&self) -> f64 {
        self.base_value + self.contributions.iter().sum::<f64>()
    }
}

#[derive(Clone, Copy)]
struct PathElem {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: usize) {
    let depth = path.len();
    path.push(PathElem {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind(path: &mut Vec<PathElem>, index: usize) {
    let depth = path.len() - 1;
    let PathElem { one, zero, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElem { one, zero, .. } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * ((depth - i) as f64 / d1);
        } else if zero != 0.0 {
            total += (path[i].weight / zero) / ((depth - i) as f64 / d1);
        }
    }
    total
}

struct Walk<'a> {
    tree: &'a DecisionTree,
    x: &'a [f64],
    phi: &'a mut [f64],
}

impl Walk<'_> {
    fn recurse(&mut self, node: usize, parent: &[PathElem], zero: f64, one: f64, feature: usize) {
        let mut path = parent.to_vec();
        extend(&mut path, zero, one, feature);
        match self.tree.nodes[node] {
            Node::Leaf { value, .. } => {
                for i in 1..path.len() {
                    let w = unwound_sum(&path, i);
                    let e = path[i];
                    self.phi[e.feature] += w * (e.one - e.zero) * value;
                }
            }
            Node::Split { feature: f, threshold, left, right, cover } => {
                let (hot, cold) = if self.x[f] <= threshold { (left, right) } else { (right, left) };
                let w = cover.unwrap_or(0.0);
                let cover_of = |n: usize| self.tree.nodes[n].cover().unwrap_or(0.0);
                let (hot_zero, cold_zero) = (cover_of(hot) / w, cover_of(cold) / w);
                let (mut in_zero, mut in_one) = (1.0, 1.0);
                if let Some(k) = (1..path.len()).find(|&k| path[k].feature == f) {
                    in_zero = path[k].zero;
                    in_one = path[k].one;
                    unwind(&mut path, k);
                }
                self.recurse(hot, &path, hot_zero * in_zero, in_one, f);
                self.recurse(cold, &path, cold_zero * in_zero, 0.0, f);
            }
        }
    }
}

/// Cover-weighted mean leaf value.
pub fn tree_expectation(tree: &DecisionTree) -> f64 {
    fn go(t: &DecisionTree, n: usize) -> f64 {
        match t.nodes[n] {
            Node::Leaf { value, .. } => value,
            Node::Split { left, right, .. } => {
                let cl = t.nodes[left].cover().unwrap_or(0.0);
                let cr = t.nodes[right].cover().unwrap_or(0.0);
                (cl * go(t, left) + cr * go(t, right)) / (cl + cr)
            }
        }
    }
    go(tree, 0)
}

/// Contributions of one tree, unscaled.
pub fn tree_shap_single(tree: &DecisionTree, x: &[f64], n_features: usize) -> Vec<f64> {
    let mut phi = vec![0.0; n_features];
    let mut walk = Walk { tree, x, phi: &mut phi };
    walk.recurse(0, &[], 1.0, 1.0, NO_FEATURE);
    phi
}

pub fn base_value(model: &TreeEnsembleModel) -> f64 {
    model.base_score + model.tree_weight() * model.trees.iter().map(tree_expectation).sum::<f64>()
}

/// Path-dependent Shapley values of the raw score.
pub fn tree_shap(model: &TreeEnsembleModel, x: &[f64]) -> Result<Attribution> {
    if !model.has_covers() {
        return Err(Error::MissingCovers);
    }
    Ok(shap_unchecked(model, x, base_value(model), String::new()))
}

fn shap_unchecked(model: &TreeEnsembleModel, x: &[f64], base: f64, instance: String) -> Attribution {
    let d = model.feature_names.len();
    let mut total = vec![0.0; d];
    for t in &model.trees {
        for (a, b) in total.iter_mut().zip(tree_shap_single(t, x, d)) {
            *a += b;
        }
    }
    let tw = model.tree_weight();
    total.iter_mut().for_each(|v| *v *= tw);
    Attribution { instance, base_value: base, contributions: total }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSet {
    pub feature_names: Vec<String>,
    pub attributions: Vec<Attribution>,
}

/// Attributions for every row of `matrix`.
pub fn explain(model: &TreeEnsembleModel, matrix: &FeatureMatrix) -> Result<AttributionSet> {
    if !model.has_covers() {
        return Err(Error::MissingCovers);
    }
    if model.feature_names != matrix.names {
        return Err(Error::ColumnMismatch("attribution matrix columns differ from the model".into()));
    }
    let base = base_value(model);
    let attributions = (0..matrix.n_rows())
        .into_par_iter()
        .map(|i| shap_unchecked(model, matrix.row(i), base, matrix.row_ids[i].clone()))
        .collect();
    Ok(AttributionSet { feature_names: model.feature_names.clone(), attributions })
}

impl AttributionSet {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["form_id".to_string(), "base_value".into()];
        header.extend(self.feature_names.iter().cloned());
        wtr.write_record(&header)?;
        for a in &self.attributions {
            let mut rec = vec![a.instance.clone(), format!("{}", a.base_value)];
            rec.extend(a.contributions.iter().map(|v| format!("{v}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<attribution writer>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub feature: String,
    pub mean_abs: f64,
}

/// Mean |contribution| per feature, descending, ties by name.
pub fn global_importance(set: &AttributionSet) -> Vec<Importance> {
    let n = set.attributions.len().max(1) as f64;
    let mut out: Vec<Importance> = set
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, f)| Importance {
            feature: f.clone(),
            mean_abs: set.attributions.iter().map(|a| a.contributions[j].abs()).sum::<f64>() / n,
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_abs
            .total_cmp(&a.mean_abs)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledAttribution {
    pub base_value: f64,
    pub contributions: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Monte-Carlo interventional Shapley values: each sample draws a feature
/// permutation and a background row, then switches features to `x` in
/// permutation order.
pub fn sampled_shapley(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    background: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<SampledAttribution> {
    if background.is_empty() {
        return Err(Error::InvalidInput("background set is empty".into()));
    }
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    let d = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; d];
    let mut sumsq = vec![0.0; d];
    let mut order: Vec<usize> = (0..d).collect();
    for _ in 0..n_samples {
        order.shuffle(&mut rng);
        let mut z = background[rng.gen_range(0..background.len())].clone();
        let mut prev = f(&z);
        for &j in &order {
            z[j] = x[j];
            let cur = f(&z);
            let m = cur - prev;
            sum[j] += m;
            sumsq[j] += m * m;
            prev = cur;
        }
    }
    let n = n_samples as f64;
    let contributions: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_errors = sumsq
        .iter()
        .zip(&contributions)
        .map(|(sq, mean)| {
            if n_samples < 2 {
                f64::INFINITY
            } else {
                ((sq / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt()
            }
        })
        .collect();
    let base_value = background.iter().map(|b| f(b)).sum::<f64>() / background.len() as f64;
    Ok(SampledAttribution { base_value, contributions, std_errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::EnsembleKind;

    fn leaf(value: f64, cover: f64) -> Node {
        Node::Leaf { value, cover: Some(cover) }
    }

    fn split(feature: usize, threshold: f64, left: usize, right: usize, cover: f64) -> Node {
        Node::Split { feature, threshold, left, right, cover: Some(cover) }
    }

    fn ensemble(trees: Vec<DecisionTree>, d: usize) -> TreeEnsembleModel {
        TreeEnsembleModel {
            kind: EnsembleKind::Gbt,
            trees,
            learning_rate: 0.3,
            base_score: 0.1,
            feature_names: (0..d).map(|i| format!("f{i}")).collect(),
        }
    }

    /// v(S): follow x for features in S, cover-average otherwise.
    fn cond_value(t: &DecisionTree, n: usize, x: &[f64], s: u32) -> f64 {
        match t.nodes[n] {
            Node::Leaf { value, .. } => value,
            Node::Split { feature, threshold, left, right, .. } => {
                if s & (1 << feature) != 0 {
                    cond_value(t, if x[feature] <= threshold { left } else { right }, x, s)
                } else {
                    let cl = t.nodes[left].cover().unwrap();
                    let cr = t.nodes[right].cover().unwrap();
                    (cl * cond_value(t, left, x, s) + cr * cond_value(t, right, x, s)) / (cl + cr)
                }
            }
        }
    }

    fn exhaustive(v: impl Fn(u32) -> f64, d: usize) -> Vec<f64> {
        let fact = |k: usize| (1..=k).product::<usize>() as f64;
        (0..d)
            .map(|i| {
                let mut phi = 0.0;
                for s in 0u32..(1 << d) {
                    if s & (1 << i) != 0 {
                        continue;
                    }
                    let k = s.count_ones() as usize;
                    let w = fact(k) * fact(d - k - 1) / fact(d);
                    phi += w * (v(s | (1 << i)) - v(s));
                }
                phi
            })
            .collect()
    }

    fn depth2() -> DecisionTree {
        DecisionTree::new(vec![
            split(0, 0.5, 1, 2, 10.0),
            split(1, 0.5, 3, 4, 6.0),
            split(1, 1.5, 5, 6, 4.0),
            leaf(1.0, 2.0),
            leaf(-2.0, 4.0),
            leaf(0.5, 3.0),
            leaf(3.0, 1.0),
        ])
    }

    #[test]
    fn single_leaf_has_no_contributions() {
        let m = ensemble(vec![DecisionTree::new(vec![leaf(2.0, 5.0)])], 3);
        let a = tree_shap(&m, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(a.contributions, vec![0.0; 3]);
        assert!((a.base_value - (0.1 + 0.3 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn depth_one_touches_only_split_feature() {
        let t = DecisionTree::new(vec![split(1, 0.0, 1, 2, 4.0), leaf(-1.0, 1.0), leaf(1.0, 3.0)]);
        let a = tree_shap(&ensemble(vec![t], 3), &[5.0, -1.0, 5.0]).unwrap();
        assert_eq!(a.contributions[0], 0.0);
        assert_eq!(a.contributions[2], 0.0);
        assert!(a.contributions[1] < 0.0);
    }

    #[test]
    fn matches_exhaustive_on_depth_two() {
        let t = depth2();
        for x in [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 2.0]] {
            let phi = tree_shap_single(&t, &x, 2);
            let oracle = exhaustive(|s| cond_value(&t, 0, &x, s), 2);
            for (a, b) in phi.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "{phi:?} vs {oracle:?}");
            }
        }
    }

    #[test]
    fn repeated_feature_on_path() {
        // feature 0 split twice on one path, feature 2 below
        let t = DecisionTree::new(vec![
            split(0, 0.5, 1, 2, 8.0),
            split(2, 0.0, 3, 4, 5.0),
            leaf(4.0, 3.0),
            split(0, 0.2, 5, 6, 3.0),
            leaf(-1.0, 2.0),
            leaf(2.0, 1.0),
            leaf(-3.0, 2.0),
        ]);
        for x in [[0.1, 9.0, -1.0], [0.3, 0.0, -1.0], [0.3, 0.0, 1.0], [0.9, 0.0, 1.0]] {
            let phi = tree_shap_single(&t, &x, 3);
            let oracle = exhaustive(|s| cond_value(&t, 0, &x, s), 3);
            for (a, b) in phi.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-12, "{x:?}: {phi:?} vs {oracle:?}");
            }
            assert_eq!(phi[1], 0.0);
        }
    }

    #[test]
    fn symmetric_tree_gives_equal_values() {
        let t = DecisionTree::new(vec![
            split(0, 0.5, 1, 2, 4.0),
            split(1, 0.5, 3, 4, 2.0),
            split(1, 0.5, 5, 6, 2.0),
            leaf(0.0, 1.0),
            leaf(1.0, 1.0),
            leaf(1.0, 1.0),
            leaf(2.0, 1.0),
        ]);
        let phi = tree_shap_single(&t, &[1.0, 1.0], 2);
        assert!((phi[0] - phi[1]).abs() < 1e-9);
    }

    #[test]
    fn linearity_and_local_accuracy() {
        let a = depth2();
        let b = DecisionTree::new(vec![split(1, 1.0, 1, 2, 10.0), leaf(0.4, 7.0), leaf(-0.9, 3.0)]);
        let both = ensemble(vec![a.clone(), b.clone()], 2);
        let x = [0.2, 1.7];
        let sum = tree_shap(&both, &x).unwrap();
        let sa = tree_shap(&ensemble(vec![a], 2), &x).unwrap();
        let sb = tree_shap(&ensemble(vec![b], 2), &x).unwrap();
        for j in 0..2 {
            assert!((sum.contributions[j] - sa.contributions[j] - sb.contributions[j]).abs() < 1e-12);
        }
        assert!((sum.total() - both.raw_score(&x)).abs() < 1e-12);
    }

    #[test]
    fn missing_covers_is_an_error() {
        let t = DecisionTree::new(vec![Node::Leaf { value: 1.0, cover: None }]);
        assert!(matches!(tree_shap(&ensemble(vec![t], 1), &[0.0]), Err(Error::MissingCovers)));
    }

    #[test]
    fn sampled_converges_to_interventional() {
        let model = ensemble(vec![depth2(), DecisionTree::new(vec![split(2, 0.0, 1, 2, 2.0), leaf(1.0, 1.0), leaf(0.0, 1.0)])], 3);
        let background = vec![vec![0.0, 0.0, 1.0], vec![1.0, 2.0, -1.0], vec![0.3, 1.0, 0.5], vec![0.9, 0.2, -0.2]];
        let x = [0.7, 0.1, -2.0];
        let v = |s: u32| {
            background
                .iter()
                .map(|b| {
                    let z: Vec<f64> = (0..3).map(|j| if s & (1 << j) != 0 { x[j] } else { b[j] }).collect();
                    model.raw_score(&z)
                })
                .sum::<f64>()
                / background.len() as f64
        };
        let oracle = exhaustive(v, 3);
        let est = sampled_shapley(|z| model.raw_score(z), &x, &background, 4000, 11).unwrap();
        for j in 0..3 {
            assert!((est.contributions[j] - oracle[j]).abs() <= 3.0 * est.std_errors[j] + 1e-12,
                "feature {j}: {} vs {} (se {})", est.contributions[j], oracle[j], est.std_errors[j]);
        }
        assert!((est.base_value - v(0)).abs() < 1e-12);
    }

    #[test]
    fn sampled_guards_and_constant_model() {
        assert!(sampled_shapley(|_| 1.0, &[0.0], &[], 10, 0).is_err());
        assert!(sampled_shapley(|_| 1.0, &[0.0], &[vec![1.0]], 0, 0).is_err());
        let s = sampled_shapley(|_| 1.0, &[0.0, 2.0], &[vec![1.0, 1.0]], 20, 0).unwrap();
        assert_eq!(s.contributions, vec![0.0, 0.0]);
    }

    #[test]
    fn importance_ranking() {
        let set = AttributionSet {
            feature_names: vec!["b".into(), "a".into(), "c".into()],
            attributions: vec![
                Attribution { instance: "1".into(), base_value: 0.0, contributions: vec![1.0, 0.5, 0.5] },
                Attribution { instance: "2".into(), base_value: 0.0, contributions: vec![-1.0, -0.5, 0.5] },
            ],
        };
        let r = global_importance(&set);
        assert_eq!(r[0].feature, "b");
        assert_eq!(r[0].mean_abs, 1.0);
        assert_eq!((r[1].feature.as_str(), r[2].feature.as_str()), ("a", "c"));
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Binary classifiers trained from scratch: gradient-boosted trees, random
//! forests and L2-regularized logistic regression.

mod forest;
mod gbt;
mod logistic;
mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use forest::{train_forest, ForestFit, ForestParams, MaxFeatures};
pub use gbt::{auto_scale_pos_weight, train_gbt, train_gbt_with_history, GbtParams};
pub use logistic::{train_logistic, LinearModel, LogisticObjective, LogisticParams};
pub use tree::{DecisionTree, Node};

use crate::error::{Error, Result};
use crate::phonofeatures::FeatureMatrix;

pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassWeighting {
    None,
    #[default]
    Balanced,
}

/// Per-sample weights; BALANCED gives class c the weight N / (2 N_c).
pub fn class_weights(labels: &[bool], weighting: ClassWeighting) -> Vec<f64> {
    match weighting {
        ClassWeighting::None => vec![1.0; labels.len()],
        ClassWeighting::Balanced => {
            let n = labels.len() as f64;
            let pos = labels.iter().filter(|l| **l).count() as f64;
            let neg = n - pos;
            labels
                .iter()
                .map(|&l| if l { n / (2.0 * pos) } else { n / (2.0 * neg) })
                .collect()
        }
    }
}

fn check_trainable(m: &FeatureMatrix) -> Result<(usize, usize)> {
    if m.n_rows() == 0 {
        return Err(Error::InvalidInput("empty training matrix".into()));
    }
    for i in 0..m.n_rows() {
        if let Some(j) = m.row(i).iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                feature: m.names[j].clone(),
                row: i,
            });
        }
    }
    let pos = m.positives();
    let neg = m.n_rows() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(format!(
            "training labels have {pos} positives and {neg} negatives"
        )));
    }
    Ok((pos, neg))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    Gbt,
    Forest,
}

/// Trained tree ensemble. The raw score is
/// `base_score + tree_weight * Σ leaf values`, where the tree weight is the
/// learning rate (GBT) or `1 / n_trees` (forest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsembleModel {
    pub kind: EnsembleKind,
    pub trees: Vec<DecisionTree>,
    pub learning_rate: f64,
    pub base_score: f64,
    pub feature_names: Vec<String>,
}

impl TreeEnsembleModel {
    pub fn tree_weight(&self) -> f64 {
        match self.kind {
            EnsembleKind::Gbt => self.learning_rate,
            EnsembleKind::Forest => {
                if self.trees.is_empty() {
                    0.0
                } else {
                    1.0 / self.trees.len() as f64
                }
            }
        }
    }

    /// Log-odds for GBT, mean leaf class-1 frequency for forests.
    pub fn raw_score(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.base_score + self.tree_weight() * sum
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        match self.kind {
            EnsembleKind::Gbt => logistic(self.raw_score(x)),
            EnsembleKind::Forest => self.raw_score(x).clamp(0.0, 1.0),
        }
    }

    pub fn has_covers(&self) -> bool {
        self.trees.iter().all(DecisionTree::has_covers)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[default]
    Gbt,
    Forest,
    Logistic,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Gbt => "gbt",
            ModelKind::Forest => "forest",
            ModelKind::Logistic => "logistic",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gbt" | "xgboost" => Ok(ModelKind::Gbt),
            "forest" | "rf" => Ok(ModelKind::Forest),
            "logistic" | "lr" => Ok(ModelKind::Logistic),
            _ => Err(Error::Config(format!("unknown model kind {s:?}"))),
        }
    }
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Model {
    Ensemble(TreeEnsembleModel),
    Linear(LinearModel),
}

impl Model {
    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Ensemble(m) => &m.feature_names,
            Model::Linear(m) => &m.feature_names,
        }
    }

    pub fn as_ensemble(&self) -> Option<&TreeEnsembleModel> {
        match self {
            Model::Ensemble(m) => Some(m),
            Model::Linear(_) => None,
        }
    }

    fn probability(&self, x: &[f64]) -> f64 {
        match self {
            Model::Ensemble(m) => m.probability(x),
            Model::Linear(m) => m.probability(x),
        }
    }

    /// Class-1 probability per row. Columns must match the training columns
    /// exactly, in order.
    pub fn predict_proba(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>> {
        check_columns(self.feature_names(), &matrix.names)?;
        Ok(matrix.rows().map(|r| self.probability(r)).collect())
    }
}

fn check_columns(expected: &[String], got: &[String]) -> Result<()> {
    if expected == got {
        return Ok(());
    }
    let missing: Vec<&str> = expected
        .iter()
        .filter(|n| !got.contains(n))
        .map(String::as_str)
        .collect();
    let extra: Vec<&str> = got
        .iter()
        .filter(|n| !expected.contains(n))
        .map(String::as_str)
        .collect();
    let msg = if missing.is_empty() && extra.is_empty() {
        "columns are in a different order".to_string()
    } else {
        format!("missing {missing:?}, unexpected {extra:?}")
    };
    Err(Error::ColumnMismatch(msg))
}

/// Hyperparameters for all three learners plus the selected kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct LearnerConfig {
    pub kind: ModelKind,
    pub gbt: GbtParams,
    pub forest: ForestParams,
    pub logistic: LogisticParams,
}

impl LearnerConfig {
    pub fn new(kind: ModelKind) -> Self {
        LearnerConfig {
            kind,
            ..Default::default()
        }
    }

    pub fn fit(&self, train: &FeatureMatrix, seed: u64) -> Result<Model> {
        Ok(match self.kind {
            ModelKind::Gbt => Model::Ensemble(train_gbt(
                train,
                &GbtParams {
                    seed,
                    ..self.gbt.clone()
                },
            )?),
            ModelKind::Forest => Model::Ensemble(
                train_forest(
                    train,
                    &ForestParams {
                        seed,
                        ..self.forest.clone()
                    },
                )?
                .model,
            ),
            ModelKind::Logistic => Model::Linear(train_logistic(train, &self.logistic)?),
        })
    }
}

/// Versioned on-disk model representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: Model,
    /// SHA-256 of the serialized feature spec the model was trained with.
    pub spec_hash: Option<String>,
}

impl ModelFile {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn new(model: Model, spec_hash: Option<String>) -> Self {
        ModelFile {
            format_version: Self::FORMAT_VERSION,
            model,
            spec_hash,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(s)?;
        if f.format_version != Self::FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "unsupported model format version {}",
                f.format_version
            )));
        }
        Ok(f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(value: f64) -> Node {
        Node::Leaf { value, cover: Some(1.0) }
    }

    fn stump(feature: usize, threshold: f64, lo: f64, hi: f64) -> DecisionTree {
        DecisionTree::new(vec![
            Node::Split { feature, threshold, left: 1, right: 2, cover: Some(2.0) },
            leaf(lo),
            leaf(hi),
        ])
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn empty_gbt_predicts_base() {
        let m = TreeEnsembleModel {
            kind: EnsembleKind::Gbt,
            trees: vec![],
            learning_rate: 0.1,
            base_score: 0.4,
            feature_names: names(1),
        };
        let x = FeatureMatrix::from_rows(names(1), vec![vec![1.0], vec![-3.0]], vec![true, false]).unwrap();
        let p = Model::Ensemble(m).predict_proba(&x).unwrap();
        assert_eq!(p, vec![logistic(0.4); 2]);
    }

    #[test]
    fn single_leaf_tree() {
        let m = TreeEnsembleModel {
            kind: EnsembleKind::Gbt,
            trees: vec![DecisionTree::new(vec![leaf(2.0)])],
            learning_rate: 0.5,
            base_score: -0.25,
            feature_names: names(2),
        };
        assert_eq!(m.probability(&[9.0, 9.0]), logistic(-0.25 + 0.5 * 2.0));
    }

    #[test]
    fn hand_evaluated_two_tree_ensemble() {
        // tree 1: x0 <= 0.5 ? -1 : 1 ; tree 2: x1 <= 2 ? 0.5 : -0.5
        let m = TreeEnsembleModel {
            kind: EnsembleKind::Gbt,
            trees: vec![stump(0, 0.5, -1.0, 1.0), stump(1, 2.0, 0.5, -0.5)],
            learning_rate: 0.1,
            base_score: 0.2,
            feature_names: names(2),
        };
        // (0.0, 3.0): -1 + -0.5 = -1.5 → 0.2 - 0.15 = 0.05
        assert!((m.raw_score(&[0.0, 3.0]) - 0.05).abs() < 1e-15);
        // (0.5, 2.0): threshold is inclusive on the left: -1 + 0.5
        assert!((m.raw_score(&[0.5, 2.0]) - 0.15).abs() < 1e-15);
        // (1.0, 0.0): 1 + 0.5 → 0.35
        assert!((m.raw_score(&[1.0, 0.0]) - 0.35).abs() < 1e-15);
    }

    #[test]
    fn forest_mean_is_order_invariant() {
        let a = stump(0, 0.5, 0.2, 0.9);
        let b = stump(0, 1.5, 0.1, 0.6);
        let mk = |trees| TreeEnsembleModel {
            kind: EnsembleKind::Forest,
            trees,
            learning_rate: 1.0,
            base_score: 0.0,
            feature_names: names(1),
        };
        let f1 = mk(vec![a.clone(), b.clone()]);
        let f2 = mk(vec![b, a]);
        for x in [0.0, 1.0, 2.0] {
            assert_eq!(f1.probability(&[x]), f2.probability(&[x]));
            assert!((0.0..=1.0).contains(&f1.probability(&[x])));
        }
        assert_eq!(f1.probability(&[1.0]), (0.9 + 0.1) / 2.0);
    }

    #[test]
    fn column_mismatch_names_columns() {
        let m = Model::Ensemble(TreeEnsembleModel {
            kind: EnsembleKind::Gbt,
            trees: vec![],
            learning_rate: 0.1,
            base_score: 0.0,
            feature_names: vec!["a".into(), "b".into()],
        });
        let x = FeatureMatrix::from_rows(vec!["a".into(), "c".into()], vec![vec![0.0, 0.0]], vec![true]).unwrap();
        let err = m.predict_proba(&x).unwrap_err().to_string();
        assert!(err.contains("\"b\"") && err.contains("\"c\""), "{err}");
    }

    #[test]
    fn balanced_weights() {
        let w = class_weights(&[true, false, false, false], ClassWeighting::Balanced);
        assert_eq!(w, vec![2.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0]);
        // 438 positives / 919 negatives
        let labels: Vec<bool> = (0..1357).map(|i| i < 438).collect();
        let w = class_weights(&labels, ClassWeighting::Balanced);
        assert!((w[0] / w[1000] - 919.0 / 438.0).abs() < 1e-12);
    }

    #[test]
    fn model_file_round_trip() {
        let m = Model::Ensemble(TreeEnsembleModel {
            kind: EnsembleKind::Gbt,
            trees: vec![stump(0, 0.5, -1.0, 1.0)],
            learning_rate: 0.05,
            base_score: 0.0,
            feature_names: names(1),
        });
        let f = ModelFile::new(m, Some("abc".into()));
        let back = ModelFile::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back, f);
        let mut v: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
        v["format_version"] = 99.into();
        assert!(ModelFile::from_json(&v.to_string()).is_err());
    }
}

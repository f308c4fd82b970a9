// SPDX-License-Identifier: Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length; 0 for two empty strings.
pub fn norm_levenshtein(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        0.0
    } else {
        levenshtein(a, b) as f64 / longest as f64
    }
}

/// Symmetric pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(ids: Vec<String>, f: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let n = ids.len();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| ((i + 1)..n).map(|j| f(i, j)).collect())
            .collect();
        let mut data = vec![0.0; n * n];
        for (i, row) in upper.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        DistanceMatrix { ids, data }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.len() + j]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Sub-matrix over `items`, in that order.
    pub fn subset(&self, items: &[usize]) -> DistanceMatrix {
        let ids = items.iter().map(|&i| self.ids[i].clone()).collect();
        DistanceMatrix::from_fn(ids, |a, b| self.get(items[a], items[b]))
    }
}

/// Normalized Levenshtein distances between all pairs of `forms`.
pub fn distance_matrix(ids: Vec<String>, forms: &[String]) -> Result<DistanceMatrix> {
    if ids.len() != forms.len() {
        return Err(Error::InvalidInput("one id per form required".into()));
    }
    if forms.len() < 2 {
        return Err(Error::InvalidInput("a distance matrix needs at least 2 forms".into()));
    }
    Ok(DistanceMatrix::from_fn(ids, |i, j| norm_levenshtein(&forms[i], &forms[j])))
}

// SPDX-License-Identifier: Apache-2.0

//! Edit-distance clustering of candidate forms and the cross-language
//! similarity permutation test.

mod cluster;
mod distance;
mod permutation;

pub use cluster::{
    cut, dbscan, dbscan_grid, silhouette, ward_cluster, ward_linkage, DbscanGrid, DbscanRun,
    Merge, WardCut, WardResult,
};
pub use distance::{distance_matrix, levenshtein, norm_levenshtein, DistanceMatrix};
pub use permutation::{
    cognate_permutation_test, CognateTestConfig, CognateTestResult, ConceptDistance, NullModel,
};

// SPDX-License-Identifier: Apache-2.0

//! Detection and auditing of phonologically non-conforming vocabulary in
//! Swadesh-style wordlists.
//!
//! The pipeline runs rule-based cognate subtraction ([`labeler`]), extracts
//! phonology-only features ([`phonofeatures`]), trains tree-ensemble and
//! linear classifiers ([`learners`]), validates them ([`evaluate`]),
//! explains them ([`attribution`]), cross-tabulates both methods
//! ([`consensus`]) and tests the resulting candidates for shared ancestry
//! ([`phonoclust`]).

pub mod attribution;
pub mod consensus;
pub mod corpus;
pub mod error;
pub mod evaluate;
pub mod labeler;
pub mod learners;
pub mod phonoclust;
pub mod phonofeatures;
pub mod pipeline;

pub use error::{Error, Result};

// SPDX-License-Identifier: Apache-2.0

//! Metrics and validation harnesses: repeated stratified CV,
//! leave-one-language-out, the variant ablation ladder, drop-one-language
//! sensitivity, the IPA rerun and expansion scoring.
//!
//! Every split rebuilds the corpus context from its training rows.

mod folds;
mod harness;
mod metrics;

pub use folds::{stratified_folds, stratified_folds_by_key};
pub use harness::{
    fit_full, fit_rows, out_of_fold_probabilities, run_ablation, run_cv, run_ipa_check,
    run_lolo, run_sensitivity, run_sensitivity_all, score_expansion, AblationRow, EvalConfig,
    EvalSummary, ExpansionGroup, ExpansionLanguage, ExpansionReport, IpaCheck, SensitivityRow,
    SplitKind, SplitResult, TrainedModel, UNGROUPED,
};
pub(crate) use harness::rows_by_form_id;
pub use metrics::{
    auc, classification_metrics, f1_score, ClassificationMetrics, Confusion, F1Class, MeanSd,
};

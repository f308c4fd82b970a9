// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::stratified_folds_by_key;
use super::metrics::{auc, confusion_metrics, ClassificationMetrics, F1Class, MeanSd};
use crate::error::{Error, Result};
use crate::labeler::LabeledCorpus;
use crate::learners::{LearnerConfig, Model, ModelKind};
use crate::phonofeatures::{
    build_rows, ipa_incidence, CorpusContext, FeatureMatrix, FeatureSpec, Mode,
    UnseenLanguages, Variant,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub learner: LearnerConfig,
    pub k: usize,
    pub seeds: Vec<u64>,
    pub threshold: f64,
    pub f1_class: F1Class,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            learner: LearnerConfig::default(),
            k: 5,
            seeds: (0..10).collect(),
            threshold: 0.5,
            f1_class: F1Class::Mainstream,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Cv,
    Lolo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub seed: Option<u64>,
    pub fold: Option<usize>,
    pub language: Option<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_positive: usize,
    /// `None` when the test rows hold a single class.
    pub auc: Option<f64>,
    pub metrics: ClassificationMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub split_kind: SplitKind,
    pub model: ModelKind,
    pub spec: FeatureSpec,
    pub k: Option<usize>,
    pub seeds: Vec<u64>,
    pub splits: Vec<SplitResult>,
    pub auc: Option<MeanSd>,
    pub f1: Option<MeanSd>,
    pub f1_candidate: Option<MeanSd>,
    pub f1_mainstream: Option<MeanSd>,
    pub macro_f1: Option<MeanSd>,
    pub accuracy: Option<MeanSd>,
}

impl EvalSummary {
    fn new(
        split_kind: SplitKind,
        spec: &FeatureSpec,
        cfg: &EvalConfig,
        splits: Vec<SplitResult>,
    ) -> Self {
        let of = |f: &dyn Fn(&SplitResult) -> Option<f64>| {
            MeanSd::of(&splits.iter().filter_map(f).collect::<Vec<_>>())
        };
        EvalSummary {
            split_kind,
            model: cfg.learner.kind,
            spec: spec.clone(),
            k: (split_kind == SplitKind::Cv).then_some(cfg.k),
            seeds: match split_kind {
                SplitKind::Cv => cfg.seeds.clone(),
                SplitKind::Lolo => vec![lolo_seed(cfg)],
            },
            auc: of(&|s| s.auc),
            f1: of(&|s| Some(s.metrics.f1)),
            f1_candidate: of(&|s| Some(s.metrics.f1_candidate)),
            f1_mainstream: of(&|s| Some(s.metrics.f1_mainstream)),
            macro_f1: of(&|s| Some(s.metrics.macro_f1)),
            accuracy: of(&|s| Some(s.metrics.accuracy)),
            splits,
        }
    }

    pub fn mean_auc(&self) -> Option<f64> {
        self.auc.map(|a| a.mean)
    }

    pub fn split_count(&self) -> usize {
        self.splits.len()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "seed", "fold", "language", "n_train", "n_test", "n_positive", "auc", "f1",
            "f1_candidate", "f1_mainstream", "macro_f1", "accuracy",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for s in &self.splits {
            wtr.write_record([
                opt(s.seed.map(|v| v.to_string())),
                opt(s.fold.map(|v| v.to_string())),
                opt(s.language.clone()),
                s.n_train.to_string(),
                s.n_test.to_string(),
                s.n_positive.to_string(),
                opt(s.auc.map(|v| format!("{v:.6}"))),
                format!("{:.6}", s.metrics.f1),
                format!("{:.6}", s.metrics.f1_candidate),
                format!("{:.6}", s.metrics.f1_mainstream),
                format!("{:.6}", s.metrics.macro_f1),
                format!("{:.6}", s.metrics.accuracy),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<summary writer>", e))?;
        Ok(())
    }
}

fn lolo_seed(cfg: &EvalConfig) -> u64 {
    cfg.seeds.first().copied().unwrap_or(0)
}

/// Corpus row indices ordered by form id.
pub(crate) fn rows_by_form_id(labeled: &LabeledCorpus) -> Vec<usize> {
    let forms = labeled.corpus.forms();
    let mut order: Vec<usize> = (0..forms.len()).collect();
    order.sort_by(|&a, &b| forms[a].form_id.cmp(&forms[b].form_id));
    order
}

pub(crate) fn targets(labeled: &LabeledCorpus, spec: &FeatureSpec) -> Vec<bool> {
    labeled
        .corpus
        .forms()
        .iter()
        .zip(labeled.labels())
        .map(|(f, l)| spec.target.is_positive(f, *l))
        .collect()
}

/// Fitted model plus the context and matrix it was trained on.
pub struct TrainedModel {
    pub model: Model,
    pub context: CorpusContext,
    pub matrix: FeatureMatrix,
}

/// Trains on `train` rows with a context built from those rows only.
pub fn fit_rows(
    labeled: &LabeledCorpus,
    train: &[usize],
    spec: &FeatureSpec,
    learner: &LearnerConfig,
    seed: u64,
) -> Result<TrainedModel> {
    let context = CorpusContext::from_rows(labeled, train, spec.target);
    let matrix = build_rows(labeled, train, &context, spec, UnseenLanguages::Reject)?;
    let model = learner.fit(&matrix, seed)?;
    Ok(TrainedModel { model, context, matrix })
}

/// Trains on the whole corpus (rows ordered by form id).
pub fn fit_full(
    labeled: &LabeledCorpus,
    spec: &FeatureSpec,
    learner: &LearnerConfig,
    seed: u64,
) -> Result<TrainedModel> {
    fit_rows(labeled, &rows_by_form_id(labeled), spec, learner, seed)
}

struct Scored {
    probs: Vec<f64>,
    labels: Vec<bool>,
    n_train: usize,
}

fn train_and_score(
    labeled: &LabeledCorpus,
    train: &[usize],
    test: &[usize],
    spec: &FeatureSpec,
    learner: &LearnerConfig,
    seed: u64,
) -> Result<Scored> {
    let fit = fit_rows(labeled, train, spec, learner, seed)?;
    let test_m = build_rows(labeled, test, &fit.context, spec, UnseenLanguages::Unknown)?;
    Ok(Scored {
        probs: fit.model.predict_proba(&test_m)?,
        labels: test_m.labels,
        n_train: train.len(),
    })
}

fn split_result(
    s: Scored,
    cfg: &EvalConfig,
    seed: Option<u64>,
    fold: Option<usize>,
    language: Option<String>,
) -> SplitResult {
    SplitResult {
        seed,
        fold,
        language,
        n_train: s.n_train,
        n_test: s.labels.len(),
        n_positive: s.labels.iter().filter(|l| **l).count(),
        auc: auc(&s.probs, &s.labels).ok(),
        metrics: confusion_metrics(&s.probs, &s.labels, cfg.threshold, cfg.f1_class),
    }
}

/// (seed, fold, train rows, test rows).
type CvSplit = (u64, usize, Vec<usize>, Vec<usize>);

fn cv_splits(
    labeled: &LabeledCorpus,
    spec: &FeatureSpec,
    k: usize,
    seeds: &[u64],
) -> Result<Vec<CvSplit>> {
    let order = rows_by_form_id(labeled);
    let all = targets(labeled, spec);
    let labels: Vec<bool> = order.iter().map(|&i| all[i]).collect();
    let forms = labeled.corpus.forms();
    let keys: Vec<&str> = order.iter().map(|&i| forms[i].form_id.as_str()).collect();
    let mut out = Vec::with_capacity(k * seeds.len());
    for &seed in seeds {
        let folds = stratified_folds_by_key(&labels, &keys, k, seed)?;
        for fold in 0..k {
            let (test, train): (Vec<(usize, usize)>, Vec<(usize, usize)>) = order
                .iter()
                .copied()
                .zip(folds.iter().copied())
                .partition(|(_, f)| *f == fold);
            out.push((
                seed,
                fold,
                train.into_iter().map(|(i, _)| i).collect(),
                test.into_iter().map(|(i, _)| i).collect(),
            ));
        }
    }
    Ok(out)
}

/// Stratified k-fold cross-validation repeated over `cfg.seeds`.
pub fn run_cv(labeled: &LabeledCorpus, spec: &FeatureSpec, cfg: &EvalConfig) -> Result<EvalSummary> {
    if cfg.seeds.is_empty() {
        return Err(Error::Config("at least one CV seed is required".into()));
    }
    let splits = cv_splits(labeled, spec, cfg.k, &cfg.seeds)?;
    let results = splits
        .par_iter()
        .map(|(seed, fold, train, test)| {
            let s = train_and_score(labeled, train, test, spec, &cfg.learner, *seed)?;
            Ok(split_result(s, cfg, Some(*seed), Some(*fold), None))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalSummary::new(SplitKind::Cv, spec, cfg, results))
}

/// Out-of-fold probability for every corpus row (one k-fold pass).
pub fn out_of_fold_probabilities(
    labeled: &LabeledCorpus,
    spec: &FeatureSpec,
    cfg: &EvalConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let splits = cv_splits(labeled, spec, cfg.k, &[seed])?;
    let parts = splits
        .par_iter()
        .map(|(_, _, train, test)| {
            let s = train_and_score(labeled, train, test, spec, &cfg.learner, seed)?;
            Ok((test.clone(), s.probs))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![f64::NAN; labeled.len()];
    for (rows, probs) in parts {
        for (i, p) in rows.into_iter().zip(probs) {
            out[i] = p;
        }
    }
    Ok(out)
}

/// Holds out each language in turn. Held-out languages are unseen by the
/// training context and get the reserved language code.
pub fn run_lolo(labeled: &LabeledCorpus, spec: &FeatureSpec, cfg: &EvalConfig) -> Result<EvalSummary> {
    let languages = labeled.corpus.languages().to_vec();
    if languages.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "leave-one-language-out needs at least 2 languages, found {}",
            languages.len()
        )));
    }
    let order = rows_by_form_id(labeled);
    let forms = labeled.corpus.forms();
    let seed = lolo_seed(cfg);
    let results = languages
        .par_iter()
        .map(|lang| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                order.iter().copied().partition(|&i| &forms[i].language_id == lang);
            let s = train_and_score(labeled, &train, &test, spec, &cfg.learner, seed)?;
            Ok(split_result(s, cfg, None, None, Some(lang.clone())))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalSummary::new(SplitKind::Lolo, spec, cfg, results))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub cv: EvalSummary,
    pub lolo: EvalSummary,
    /// Relative to MODEL_B when it is among the variants.
    pub delta_cv_auc: Option<f64>,
    pub delta_lolo_auc: Option<f64>,
}

pub fn run_ablation(
    labeled: &LabeledCorpus,
    base: &FeatureSpec,
    variants: &[Variant],
    cfg: &EvalConfig,
) -> Result<Vec<AblationRow>> {
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let spec = FeatureSpec { variant, ..base.clone() };
        rows.push(AblationRow {
            variant,
            cv: run_cv(labeled, &spec, cfg)?,
            lolo: run_lolo(labeled, &spec, cfg)?,
            delta_cv_auc: None,
            delta_lolo_auc: None,
        });
    }
    if let Some(b) = rows.iter().find(|r| r.variant == Variant::ModelB) {
        let (bc, bl) = (b.cv.mean_auc(), b.lolo.mean_auc());
        for r in &mut rows {
            r.delta_cv_auc = r.cv.mean_auc().zip(bc).map(|(a, b)| a - b);
            r.delta_lolo_auc = r.lolo.mean_auc().zip(bl).map(|(a, b)| a - b);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub dropped: String,
    pub n_dropped: usize,
    pub full_auc: Option<f64>,
    pub reduced_auc: Option<f64>,
    pub delta_auc: Option<f64>,
}

fn sensitivity_row(
    labeled: &LabeledCorpus,
    drop: &str,
    spec: &FeatureSpec,
    cfg: &EvalConfig,
    full: &EvalSummary,
) -> Result<SensitivityRow> {
    let reduced = labeled.filtered(|f| f.language_id != drop);
    let n_dropped = labeled.len() - reduced.len();
    let reduced_auc = if n_dropped == 0 {
        full.mean_auc()
    } else {
        run_cv(&reduced, spec, cfg)?.mean_auc()
    };
    Ok(SensitivityRow {
        dropped: drop.to_string(),
        n_dropped,
        full_auc: full.mean_auc(),
        reduced_auc,
        delta_auc: reduced_auc.zip(full.mean_auc()).map(|(r, f)| r - f),
    })
}

/// CV on the corpus without `drop`, compared with the full corpus.
pub fn run_sensitivity(
    labeled: &LabeledCorpus,
    drop: &str,
    spec: &FeatureSpec,
    cfg: &EvalConfig,
) -> Result<SensitivityRow> {
    let full = run_cv(labeled, spec, cfg)?;
    sensitivity_row(labeled, drop, spec, cfg, &full)
}

/// Drops each language in turn.
pub fn run_sensitivity_all(
    labeled: &LabeledCorpus,
    spec: &FeatureSpec,
    cfg: &EvalConfig,
) -> Result<Vec<SensitivityRow>> {
    let full = run_cv(labeled, spec, cfg)?;
    labeled
        .corpus
        .languages()
        .iter()
        .map(|l| sensitivity_row(labeled, l, spec, cfg, &full))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpaCheck {
    /// Forms whose surface changes under IPA conversion, per language.
    pub incidence: BTreeMap<String, usize>,
    pub altered_forms: usize,
    pub orthographic: EvalSummary,
    pub ipa: EvalSummary,
    pub delta_auc: Option<f64>,
}

/// Reruns CV with features computed on IPA forms.
pub fn run_ipa_check(labeled: &LabeledCorpus, spec: &FeatureSpec, cfg: &EvalConfig) -> Result<IpaCheck> {
    let incidence = ipa_incidence(labeled, &spec.inventories);
    let orthographic = run_cv(labeled, &spec.clone().with_mode(Mode::Orthographic), cfg)?;
    let ipa = run_cv(labeled, &spec.clone().with_mode(Mode::Ipa), cfg)?;
    Ok(IpaCheck {
        altered_forms: incidence.values().sum(),
        incidence,
        delta_auc: ipa.mean_auc().zip(orthographic.mean_auc()).map(|(a, b)| a - b),
        orthographic,
        ipa,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionLanguage {
    pub language_id: String,
    pub group: String,
    pub n_forms: usize,
    pub rule_positive_pct: f64,
    /// Share of forms with probability at or above the threshold.
    pub predicted_pct: f64,
    pub mean_probability: f64,
    /// Against the language's own rule labels; `None` if single-class.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionGroup {
    pub group: String,
    pub languages: usize,
    pub n_forms: usize,
    /// Unweighted means over the group's languages.
    pub mean_rule_pct: f64,
    pub mean_predicted_pct: f64,
    pub mean_probability: f64,
    pub mean_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub variant: Variant,
    pub languages: Vec<ExpansionLanguage>,
    pub groups: Vec<ExpansionGroup>,
}

pub const UNGROUPED: &str = "ungrouped";

/// Applies a trained model to a separately labeled corpus.
pub fn score_expansion(
    model: &Model,
    context: &CorpusContext,
    spec: &FeatureSpec,
    new: &LabeledCorpus,
    groups: &BTreeMap<String, String>,
    threshold: f64,
) -> Result<ExpansionReport> {
    let forms = new.corpus.forms();
    let mut languages = Vec::new();
    for lang in new.corpus.languages() {
        let rows: Vec<usize> = (0..forms.len())
            .filter(|&i| &forms[i].language_id == lang)
            .collect();
        let m = build_rows(new, &rows, context, spec, UnseenLanguages::Unknown)?;
        let probs = model.predict_proba(&m)?;
        let n = rows.len() as f64;
        let group = groups.get(lang).cloned().unwrap_or_else(|| {
            log::warn!("language {lang} missing from the group map; using {UNGROUPED}");
            UNGROUPED.to_string()
        });
        languages.push(ExpansionLanguage {
            language_id: lang.clone(),
            group,
            n_forms: rows.len(),
            rule_positive_pct: 100.0 * m.positives() as f64 / n,
            predicted_pct: 100.0 * probs.iter().filter(|p| **p >= threshold).count() as f64 / n,
            mean_probability: probs.iter().sum::<f64>() / n,
            auc: auc(&probs, &m.labels).ok(),
        });
    }
    let mut by_group: BTreeMap<&str, Vec<&ExpansionLanguage>> = BTreeMap::new();
    for l in &languages {
        by_group.entry(&l.group).or_default().push(l);
    }
    let groups = by_group
        .into_iter()
        .map(|(g, ls)| {
            let k = ls.len() as f64;
            let mean = |f: fn(&ExpansionLanguage) -> f64| ls.iter().map(|l| f(l)).sum::<f64>() / k;
            let aucs: Vec<f64> = ls.iter().filter_map(|l| l.auc).collect();
            ExpansionGroup {
                group: g.to_string(),
                languages: ls.len(),
                n_forms: ls.iter().map(|l| l.n_forms).sum(),
                mean_rule_pct: mean(|l| l.rule_positive_pct),
                mean_predicted_pct: mean(|l| l.predicted_pct),
                mean_probability: mean(|l| l.mean_probability),
                mean_auc: MeanSd::of(&aucs).map(|s| s.mean),
            }
        })
        .collect();
    Ok(ExpansionReport {
        variant: spec.variant,
        languages,
        groups,
    })
}

// SPDX-License-Identifier: Apache-2.0

//! Rule-based cognate subtraction. Each form is assigned exactly one stage,
//! tested in order: cognate-coded, known loanword, rescued by a
//! proto-language reconstruction, otherwise residual.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{clean_form, CorpusTable, DEFAULT_GLOTTAL_MARKERS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Mainstream,
    Candidate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stage {
    AbvdCognate,
    LoanwordExcluded,
    PanRescued,
    Residual,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::AbvdCognate => "ABVD_COGNATE",
            Stage::LoanwordExcluded => "LOANWORD_EXCLUDED",
            Stage::PanRescued => "PAN_RESCUED",
            Stage::Residual => "RESIDUAL",
        }
    }

    pub fn status(self) -> Status {
        match self {
            Stage::Residual => Status::Candidate,
            _ => Status::Mainstream,
        }
    }
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Mainstream => "MAINSTREAM",
            Status::Candidate => "CANDIDATE",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Stage::AbvdCognate,
            Stage::LoanwordExcluded,
            Stage::PanRescued,
            Stage::Residual,
        ]
        .into_iter()
        .find(|st| st.as_str() == s.trim())
        .ok_or_else(|| Error::InvalidInput(format!("unknown stage {s:?}")))
    }
}

/// Outcome of subtraction for one form. The status is a function of the stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubtractionLabel {
    pub stage: Stage,
}

impl SubtractionLabel {
    pub fn status(self) -> Status {
        self.stage.status()
    }

    pub fn is_candidate(self) -> bool {
        self.stage == Stage::Residual
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoanEntry {
    /// `None` matches every language.
    pub language_id: Option<String>,
    pub form: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RescueEntry {
    pub concept_id: String,
    pub language_id: Option<String>,
    pub form: String,
    pub proto_form: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RescueMatch {
    #[default]
    Exact,
    /// Language-restricted entries also match forms that start with the
    /// entry form. Wildcard entries stay exact.
    Prefix,
}

fn lang_opt(s: &str) -> Option<String> {
    let s = s.trim();
    (s != "*" && !s.is_empty()).then(|| s.to_string())
}

fn normalize(form: &str) -> String {
    clean_form(form, &DEFAULT_GLOTTAL_MARKERS).unwrap_or_default()
}

/// Reads a loan list with header `language_id,form`.
pub fn read_loans<R: Read>(reader: R) -> Result<Vec<LoanEntry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::InvalidInput(format!("loan row {:?} needs 2 fields", rec)));
        }
        out.push(LoanEntry {
            language_id: lang_opt(&rec[0]),
            form: normalize(&rec[1]),
        });
    }
    Ok(out)
}

/// Reads a rescue list with header `concept_id,language_id,form,proto_form`.
pub fn read_rescues<R: Read>(reader: R) -> Result<Vec<RescueEntry>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() < 3 {
            return Err(Error::InvalidInput(format!("rescue row {:?} needs 3+ fields", rec)));
        }
        out.push(RescueEntry {
            concept_id: rec[0].trim().to_string(),
            language_id: lang_opt(&rec[1]),
            form: normalize(&rec[2]),
            proto_form: rec.get(3).unwrap_or("").trim().to_string(),
        });
    }
    Ok(out)
}

/// A logged rescue: which form matched which entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RescueHit {
    pub form_id: String,
    pub entry_index: usize,
    pub proto_form: String,
}

/// A corpus plus one label per form (aligned with `corpus.forms()`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledCorpus {
    pub corpus: CorpusTable,
    labels: Vec<SubtractionLabel>,
    pub rescue_log: Vec<RescueHit>,
}

impl LabeledCorpus {
    pub fn from_parts(corpus: CorpusTable, labels: Vec<SubtractionLabel>) -> Result<Self> {
        if labels.len() != corpus.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} forms",
                labels.len(),
                corpus.len()
            )));
        }
        Ok(LabeledCorpus {
            corpus,
            labels,
            rescue_log: Vec::new(),
        })
    }

    pub fn labels(&self) -> &[SubtractionLabel] {
        &self.labels
    }

    pub fn label_of(&self, form_id: &str) -> Option<SubtractionLabel> {
        self.corpus
            .forms()
            .iter()
            .position(|f| f.form_id == form_id)
            .map(|i| self.labels[i])
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn count(&self, stage: Stage) -> usize {
        self.labels.iter().filter(|l| l.stage == stage).count()
    }

    /// Keeps the forms (and their labels) for which `keep` holds.
    pub fn filtered(&self, mut keep: impl FnMut(&crate::corpus::LexicalForm) -> bool) -> Self {
        let mut kept_labels = Vec::new();
        let mut kept_ids = BTreeSet::new();
        for (f, l) in self.corpus.forms().iter().zip(&self.labels) {
            if keep(f) {
                kept_labels.push(*l);
                kept_ids.insert(f.form_id.clone());
            }
        }
        let corpus = self.corpus.filtered(|f| kept_ids.contains(&f.form_id));
        LabeledCorpus {
            corpus,
            labels: kept_labels,
            rescue_log: self
                .rescue_log
                .iter()
                .filter(|h| kept_ids.contains(&h.form_id))
                .cloned()
                .collect(),
        }
    }

    /// Reassembles a labeled corpus from an exported label table.
    pub fn with_label_table<R: Read>(corpus: CorpusTable, reader: R) -> Result<Self> {
        let mut by_id = BTreeMap::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for rec in rdr.records() {
            let rec = rec?;
            let stage: Stage = rec.get(2).unwrap_or("").parse()?;
            by_id.insert(rec.get(0).unwrap_or("").to_string(), SubtractionLabel { stage });
        }
        let labels = corpus
            .forms()
            .iter()
            .map(|f| {
                by_id.get(&f.form_id).copied().ok_or_else(|| {
                    Error::InvalidInput(format!("no label for form {:?}", f.form_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        LabeledCorpus::from_parts(corpus, labels)
    }

    /// Exports `form_id,status,stage`.
    pub fn write_labels<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["form_id", "status", "stage"])?;
        for (f, l) in self.corpus.forms().iter().zip(&self.labels) {
            wtr.write_record([&f.form_id, l.status().as_str(), l.stage.as_str()])?;
        }
        wtr.flush().map_err(|e| Error::io("<label writer>", e))?;
        Ok(())
    }
}

/// Runs the three-stage subtraction.
pub fn subtract(
    corpus: &CorpusTable,
    loans: &[LoanEntry],
    rescues: &[RescueEntry],
    matching: RescueMatch,
) -> LabeledCorpus {
    let mut labels = Vec::with_capacity(corpus.len());
    let mut rescue_log = Vec::new();
    for f in corpus.forms() {
        let stage = if f.is_coded() {
            Stage::AbvdCognate
        } else if f.loan_flag
            || loans.iter().any(|l| {
                l.language_id.as_deref().is_none_or(|lang| lang == f.language_id)
                    && l.form == f.clean_form
            })
        {
            Stage::LoanwordExcluded
        } else if let Some((ix, entry)) = rescues.iter().enumerate().find(|(_, r)| {
            r.concept_id == f.concept_id
                && r.language_id.as_deref().is_none_or(|lang| lang == f.language_id)
                && match (matching, &r.language_id) {
                    (RescueMatch::Prefix, Some(_)) => f.clean_form.starts_with(&r.form),
                    _ => f.clean_form == r.form,
                }
        }) {
            log::debug!(
                "rescued {} ({:?}) via entry {ix} {:?}",
                f.form_id,
                f.clean_form,
                entry.proto_form
            );
            rescue_log.push(RescueHit {
                form_id: f.form_id.clone(),
                entry_index: ix,
                proto_form: entry.proto_form.clone(),
            });
            Stage::PanRescued
        } else {
            Stage::Residual
        };
        labels.push(SubtractionLabel { stage });
    }
    LabeledCorpus {
        corpus: corpus.clone(),
        labels,
        rescue_log,
    }
}

/// Residual share of the forms that remain after loanword exclusion, in percent.
pub fn residual_rate(residual: usize, total: usize, loans: usize) -> f64 {
    let denom = total.saturating_sub(loans);
    if denom == 0 {
        0.0
    } else {
        100.0 * residual as f64 / denom as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub language_id: String,
    pub total: usize,
    pub coded: usize,
    pub loans: usize,
    pub rescued: usize,
    pub residual: usize,
    pub residual_pct: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualTable {
    pub rows: Vec<ResidualRow>,
    /// Unweighted mean of the per-language percentages.
    pub mean_residual_pct: f64,
}

impl ResidualTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "language", "total", "has_cognacy", "loans", "rescued", "residual", "pct_residual",
            "coverage",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.language_id.clone(),
                r.total.to_string(),
                r.coded.to_string(),
                r.loans.to_string(),
                r.rescued.to_string(),
                r.residual.to_string(),
                format!("{:.1}", r.residual_pct),
                format!("{:.0}", 100.0 * r.coverage),
            ])?;
        }
        wtr.write_record([
            "Mean".to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            format!("{:.1}", self.mean_residual_pct),
            String::new(),
        ])?;
        wtr.flush().map_err(|e| Error::io("<residual writer>", e))?;
        Ok(())
    }
}

pub fn residual_table(labeled: &LabeledCorpus) -> ResidualTable {
    let mut by_lang: BTreeMap<&str, ResidualRow> = BTreeMap::new();
    for (f, l) in labeled.corpus.forms().iter().zip(labeled.labels()) {
        let row = by_lang
            .entry(&f.language_id)
            .or_insert_with(|| ResidualRow {
                language_id: f.language_id.clone(),
                total: 0,
                coded: 0,
                loans: 0,
                rescued: 0,
                residual: 0,
                residual_pct: 0.0,
                coverage: 0.0,
            });
        row.total += 1;
        match l.stage {
            Stage::AbvdCognate => row.coded += 1,
            Stage::LoanwordExcluded => row.loans += 1,
            Stage::PanRescued => row.rescued += 1,
            Stage::Residual => row.residual += 1,
        }
    }
    let rows: Vec<ResidualRow> = by_lang
        .into_values()
        .map(|mut r| {
            r.residual_pct = residual_rate(r.residual, r.total, r.loans);
            r.coverage = r.coded as f64 / r.total as f64;
            r
        })
        .collect();
    let mean_residual_pct = if rows.is_empty() {
        0.0
    } else {
        rows.iter().map(|r| r.residual_pct).sum::<f64>() / rows.len() as f64
    };
    ResidualTable {
        rows,
        mean_residual_pct,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersistentConcept {
    pub concept_id: String,
    pub gloss: String,
    pub languages: usize,
}

/// Concepts whose forms selected by `member` span at least `min_languages`
/// languages, sorted by language count (descending) then concept id.
pub(crate) fn persistent_concepts<'a>(
    corpus: &CorpusTable,
    members: impl Iterator<Item = &'a crate::corpus::LexicalForm>,
    min_languages: usize,
) -> Vec<PersistentConcept> {
    let mut spans: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for f in members {
        spans
            .entry(f.concept_id.as_str())
            .or_default()
            .insert(f.language_id.as_str());
    }
    let mut out: Vec<PersistentConcept> = spans
        .into_iter()
        .filter(|(_, langs)| langs.len() >= min_languages.max(1))
        .map(|(c, langs)| PersistentConcept {
            concept_id: c.to_string(),
            gloss: corpus.gloss(c).to_string(),
            languages: langs.len(),
        })
        .collect();
    out.sort_by(|a, b| {
        b.languages
            .cmp(&a.languages)
            .then_with(|| a.concept_id.cmp(&b.concept_id))
    });
    out
}

pub fn persistent_residual_concepts(
    labeled: &LabeledCorpus,
    min_languages: usize,
) -> Vec<PersistentConcept> {
    let residuals = labeled
        .corpus
        .forms()
        .iter()
        .zip(labeled.labels())
        .filter(|(_, l)| l.is_candidate())
        .map(|(f, _)| f);
    persistent_concepts(&labeled.corpus, residuals, min_languages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LexicalForm;

    fn form(id: &str, lang: &str, concept: &str, clean: &str, codes: &[&str]) -> LexicalForm {
        LexicalForm {
            form_id: id.into(),
            language_id: lang.into(),
            concept_id: concept.into(),
            concept_gloss: concept.into(),
            raw_form: clean.into(),
            clean_form: clean.into(),
            cognate_codes: codes.iter().map(|s| s.to_string()).collect(),
            loan_flag: false,
        }
    }

    fn corpus(forms: Vec<LexicalForm>) -> CorpusTable {
        CorpusTable::new(forms, Default::default(), Default::default())
    }

    #[test]
    fn stage_order() {
        let c = corpus(vec![
            form("a", "x", "eye", "mata", &["2"]),
            form("b", "x", "eye", "kitab", &[]),
            form("c", "x", "hand", "lima", &[]),
            form("d", "x", "bite", "koʔot", &[]),
            form("e", "x", "hand", "mata", &["3"]),
        ]);
        let loans = vec![
            LoanEntry { language_id: None, form: "kitab".into() },
            LoanEntry { language_id: Some("x".into()), form: "mata".into() },
        ];
        let rescues = vec![RescueEntry {
            concept_id: "hand".into(),
            language_id: None,
            form: "lima".into(),
            proto_form: "*lima".into(),
        }];
        let l = subtract(&c, &loans, &rescues, RescueMatch::Exact);
        let stages: Vec<Stage> = l.labels().iter().map(|l| l.stage).collect();
        assert_eq!(
            stages,
            vec![
                Stage::AbvdCognate,
                Stage::LoanwordExcluded,
                Stage::PanRescued,
                Stage::Residual,
                Stage::AbvdCognate,
            ]
        );
        assert_eq!(l.labels()[1].status(), Status::Mainstream);
        assert_eq!(l.labels()[3].status(), Status::Candidate);
        assert_eq!(l.rescue_log.len(), 1);
        assert_eq!(l.rescue_log[0].proto_form, "*lima");
    }

    #[test]
    fn rescue_is_concept_and_language_scoped() {
        let c = corpus(vec![
            form("a", "x", "hand", "lima", &[]),
            form("b", "y", "hand", "limaŋ", &[]),
            form("c", "y", "five", "lima", &[]),
        ]);
        let rescues = vec![RescueEntry {
            concept_id: "hand".into(),
            language_id: Some("y".into()),
            form: "lima".into(),
            proto_form: String::new(),
        }];
        let exact = subtract(&c, &[], &rescues, RescueMatch::Exact);
        assert_eq!(exact.count(Stage::PanRescued), 0);
        let prefix = subtract(&c, &[], &rescues, RescueMatch::Prefix);
        assert_eq!(prefix.labels()[1].stage, Stage::PanRescued);
        assert_eq!(prefix.count(Stage::PanRescued), 1);
    }

    #[test]
    fn empty_lists_give_pure_cognate_subtraction() {
        let c = corpus(vec![form("a", "x", "eye", "mata", &["1"]), form("b", "x", "if", "ane", &[])]);
        let l = subtract(&c, &[], &[], RescueMatch::Exact);
        assert_eq!(l.count(Stage::AbvdCognate), 1);
        assert_eq!(l.count(Stage::Residual), 1);
        assert_eq!(l, subtract(&c, &[], &[], RescueMatch::Exact));
    }

    #[test]
    fn residual_rates() {
        assert!((residual_rate(114, 209, 0) - 54.545).abs() < 1e-3);
        assert_eq!(residual_rate(0, 10, 0), 0.0);
        assert_eq!(residual_rate(1, 3, 1), 50.0);
        let c = corpus(vec![form("a", "x", "eye", "mata", &["1"])]);
        let t = residual_table(&subtract(&c, &[], &[], RescueMatch::Exact));
        assert_eq!(t.rows[0].residual_pct, 0.0);
        assert_eq!(t.rows[0].coverage, 1.0);
    }

    #[test]
    fn persistent_concepts_thresholds() {
        let mut forms = Vec::new();
        for (i, lang) in ["a", "b", "c"].iter().enumerate() {
            forms.push(form(&format!("{lang}1"), lang, "if", "ane", &[]));
            if i < 2 {
                forms.push(form(&format!("{lang}2"), lang, "big", "owose", &[]));
            }
            forms.push(form(&format!("{lang}3"), lang, "eye", "mata", &["1"]));
        }
        let l = subtract(&corpus(forms), &[], &[], RescueMatch::Exact);
        let p = persistent_residual_concepts(&l, 2);
        assert_eq!(p.iter().map(|c| (c.concept_id.as_str(), c.languages)).collect::<Vec<_>>(),
            vec![("if", 3), ("big", 2)]);
        assert_eq!(persistent_residual_concepts(&l, 1).len(), 2);
        assert!(persistent_residual_concepts(&l, 4).is_empty());
    }

    #[test]
    fn label_table_round_trip() {
        let c = corpus(vec![form("a", "x", "eye", "mata", &["1"]), form("b", "x", "if", "ane", &[])]);
        let l = subtract(&c, &[], &[], RescueMatch::Exact);
        let mut buf = Vec::new();
        l.write_labels(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("b,CANDIDATE,RESIDUAL"));
        let again = LabeledCorpus::with_label_table(c, buf.as_slice()).unwrap();
        assert_eq!(again.labels(), l.labels());
    }

    #[test]
    fn list_readers() {
        let loans = read_loans("language_id,form\n*,Kitab\nmuna,sabun\n".as_bytes()).unwrap();
        assert_eq!(loans[0], LoanEntry { language_id: None, form: "kitab".into() });
        assert_eq!(loans[1].language_id.as_deref(), Some("muna"));
        let r = read_rescues("concept_id,language_id,form,proto_form\nhand,*,lima,*lima\n".as_bytes()).unwrap();
        assert_eq!(r[0].proto_form, "*lima");
    }
}

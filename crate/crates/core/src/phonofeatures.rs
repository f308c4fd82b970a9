// SPDX-License-Identifier: Apache-2.0

//! Phonological feature extraction from cleaned surface forms.
//!
//! Four nested feature sets are supported: the full set with cognacy-derived
//! distributional columns (31), the phonology-only set (27), the set without
//! the language coverage control (26), and the set without either language
//! control (25). Omitting the length feature removes one further column.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Domain, LexicalForm, DEFAULT_GLOTTAL_MARKERS};
use crate::error::{Error, Result};
use crate::labeler::{LabeledCorpus, Stage, SubtractionLabel};

/// Numeric code assigned to a language absent from the training context.
pub const UNKNOWN_LANGUAGE_CODE: f64 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    ModelA,
    ModelB,
    Ablated,
    Pure,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::ModelA => "A",
            Variant::ModelB => "B",
            Variant::Ablated => "ablated",
            Variant::Pure => "pure",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" | "model_a" => Ok(Variant::ModelA),
            "b" | "model_b" => Ok(Variant::ModelB),
            "ablated" => Ok(Variant::Ablated),
            "pure" => Ok(Variant::Pure),
            _ => Err(Error::Config(format!("unknown variant {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    #[default]
    Orthographic,
    Ipa,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "orth" | "orthographic" => Ok(Mode::Orthographic),
            "ipa" => Ok(Mode::Ipa),
            _ => Err(Error::Config(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LengthMetric {
    #[default]
    CharCount,
    SyllableCount,
    Omit,
}

impl FromStr for LengthMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "char" | "char_count" => Ok(LengthMetric::CharCount),
            "syllable" | "syllable_count" => Ok(LengthMetric::SyllableCount),
            "omit" => Ok(LengthMetric::Omit),
            _ => Err(Error::Config(format!("unknown length metric {s:?}"))),
        }
    }
}

/// Which forms count as the positive class for the classifiers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TargetPolicy {
    /// Positive iff the subtraction stage is RESIDUAL.
    #[default]
    Residual,
    /// Positive iff the form carries no cognate code (before loan and rescue
    /// stages are applied).
    Uncoded,
}

impl TargetPolicy {
    pub fn is_positive(self, form: &LexicalForm, label: SubtractionLabel) -> bool {
        match self {
            TargetPolicy::Residual => label.stage == Stage::Residual,
            TargetPolicy::Uncoded => !form.is_coded(),
        }
    }
}

impl FromStr for TargetPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "residual" => Ok(TargetPolicy::Residual),
            "uncoded" => Ok(TargetPolicy::Uncoded),
            _ => Err(Error::Config(format!("unknown target policy {s:?}"))),
        }
    }
}

/// A digraph replacement used for the approximate IPA transcription.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigraphRule {
    /// `None` applies to every language.
    #[serde(default)]
    pub language_id: Option<String>,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Inventories {
    pub vowels: Vec<char>,
    pub glottal_markers: Vec<char>,
    pub nasal_clusters: Vec<String>,
    /// Nasal segments that start a cluster in IPA mode.
    pub ipa_nasals: Vec<char>,
    pub prefixes: Vec<String>,
    pub onset_classes: Vec<char>,
    pub digraphs: Vec<DigraphRule>,
}

impl Default for Inventories {
    fn default() -> Self {
        let s = |xs: &[&str]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let rule = |lang: Option<&str>, from: &str, to: &str| DigraphRule {
            language_id: lang.map(str::to_string),
            from: from.into(),
            to: to.into(),
        };
        Inventories {
            vowels: vec!['a', 'e', 'i', 'o', 'u'],
            glottal_markers: DEFAULT_GLOTTAL_MARKERS.to_vec(),
            nasal_clusters: s(&["ng", "mb", "nd", "nj", "mp", "nt", "nk", "ns", "ngg", "nc"]),
            ipa_nasals: vec!['m', 'n', 'ŋ', 'ɲ'],
            prefixes: s(&[
                "ma", "me", "mo", "mu", "pa", "pe", "po", "ka", "ke", "ko", "sa", "ta", "to",
            ]),
            onset_classes: vec!['m', 'a', 'b', 't', 'k', 'p', 's'],
            digraphs: vec![
                rule(None, "ng", "ŋ"),
                rule(None, "ny", "ɲ"),
                rule(Some("muna"), "gh", "ɣ"),
                rule(Some("muna"), "bh", "β"),
            ],
        }
    }
}

impl Inventories {
    fn is_vowel(&self, c: char) -> bool {
        self.vowels.contains(&c)
    }

    fn is_glottal(&self, c: char) -> bool {
        self.glottal_markers.contains(&c)
    }

    fn is_consonant(&self, c: char) -> bool {
        (c.is_alphabetic() && !self.is_vowel(c)) || self.is_glottal(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub variant: Variant,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub length_metric: LengthMetric,
    #[serde(default)]
    pub inventories: Inventories,
    #[serde(default)]
    pub target: TargetPolicy,
    /// Appends a column equal to the training label. Only for leakage tests.
    #[serde(default)]
    pub leak_canary: bool,
}

const SCALARS: [&str; 8] = [
    "vowel_count",
    "vowel_ratio",
    "ends_in_vowel",
    "has_glottal",
    "has_nasal_cluster",
    "has_reduplication",
    "consonant_cluster_count",
    "has_an_prefix",
];

const DISTRIBUTIONAL: [&str; 4] = [
    "cognate_set_size",
    "n_cognate_sets_per_form",
    "concept_residual_rate",
    "cross_language_residual_count",
];

impl FeatureSpec {
    pub fn new(variant: Variant) -> Self {
        FeatureSpec {
            variant,
            mode: Mode::default(),
            length_metric: LengthMetric::default(),
            inventories: Inventories::default(),
            target: TargetPolicy::default(),
            leak_canary: false,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_length_metric(mut self, metric: LengthMetric) -> Self {
        self.length_metric = metric;
        self
    }

    pub fn with_target(mut self, target: TargetPolicy) -> Self {
        self.target = target;
        self
    }

    /// Column names, in matrix order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(32);
        if self.length_metric != LengthMetric::Omit {
            names.push("form_length".to_string());
        }
        names.extend(SCALARS.iter().map(|s| s.to_string()));
        for c in &self.inventories.onset_classes {
            names.push(format!("onset_{c}"));
        }
        names.push("onset_other".into());
        names.push("is_swadesh100".into());
        for d in Domain::ALL {
            names.push(format!("domain_{}", d.as_str().to_ascii_lowercase()));
        }
        if self.variant != Variant::Pure {
            names.push("language_id_encoded".into());
        }
        if matches!(self.variant, Variant::ModelA | Variant::ModelB) {
            names.push("language_cognacy_coverage".into());
        }
        if self.variant == Variant::ModelA {
            names.extend(DISTRIBUTIONAL.iter().map(|s| s.to_string()));
        }
        if self.leak_canary {
            names.push("leak_label".into());
        }
        names
    }
}

/// Strips diacritics from vowels and other letters (é → e).
fn fold(form: &str) -> String {
    form.nfd().filter(|c| !is_combining_mark(*c)).nfc().collect()
}

fn is_separator(c: char) -> bool {
    c == ' ' || c == '-'
}

/// Number of maximal vowel runs.
pub fn count_syllables(form: &str, vowels: &[char]) -> usize {
    let mut count = 0;
    let mut in_run = false;
    for c in fold(form).chars() {
        let v = vowels.contains(&c);
        if v && !in_run {
            count += 1;
        }
        in_run = v;
    }
    count
}

/// Number of maximal runs of two or more consonants. Spaces and hyphens
/// break runs.
pub fn count_consonant_clusters(form: &str, inv: &Inventories) -> usize {
    let mut count = 0;
    let mut run = 0;
    for c in fold(form).chars().chain(std::iter::once(' ')) {
        if inv.is_consonant(c) {
            run += 1;
        } else {
            if run >= 2 {
                count += 1;
            }
            run = 0;
        }
    }
    count
}

/// Hyphenated halves sharing a two-character prefix, or an immediately
/// repeated bigram or trigram.
pub fn detect_reduplication(form: &str) -> bool {
    let chars: Vec<char> = form.chars().collect();
    if let Some(pos) = chars.iter().position(|c| *c == '-') {
        let left = &chars[..pos];
        let right = &chars[pos + 1..];
        if left.len() >= 2 && right.len() >= 2 && left[..2] == right[..2] {
            return true;
        }
    }
    for n in [2usize, 3] {
        if chars.len() < 2 * n {
            continue;
        }
        for i in 0..=chars.len() - 2 * n {
            let a = &chars[i..i + n];
            if a.iter().any(|c| is_separator(*c)) {
                continue;
            }
            if a == &chars[i + n..i + 2 * n] {
                return true;
            }
        }
    }
    false
}

/// True iff the form starts with a listed prefix and the remainder still
/// contains a vowel.
pub fn detect_prefix(form: &str, prefixes: &[String], vowels: &[char]) -> bool {
    let folded = fold(form);
    prefixes.iter().any(|p| {
        folded
            .strip_prefix(p.as_str())
            .is_some_and(|rest| rest.chars().any(|c| vowels.contains(&c)))
    })
}

/// Single left-to-right longest-match digraph replacement.
pub fn to_ipa(form: &str, language_id: &str, rules: &[DigraphRule]) -> String {
    let mut active: Vec<&DigraphRule> = rules
        .iter()
        .filter(|r| {
            !r.from.is_empty() && r.language_id.as_deref().is_none_or(|l| l == language_id)
        })
        .collect();
    active.sort_by_key(|r| std::cmp::Reverse(r.from.chars().count()));
    let mut out = String::with_capacity(form.len());
    let mut rest = form;
    'outer: while !rest.is_empty() {
        for r in &active {
            if let Some(tail) = rest.strip_prefix(r.from.as_str()) {
                out.push_str(&r.to);
                rest = tail;
                continue 'outer;
            }
        }
        let c = rest.chars().next().unwrap_or_default();
        out.push(c);
        rest = &rest[c.len_utf8()..];
    }
    out
}

fn has_nasal_cluster(form: &str, spec: &FeatureSpec) -> bool {
    let inv = &spec.inventories;
    match spec.mode {
        Mode::Orthographic => inv.nasal_clusters.iter().any(|nc| form.contains(nc.as_str())),
        Mode::Ipa => form
            .chars()
            .zip(form.chars().skip(1))
            .any(|(a, b)| inv.ipa_nasals.contains(&a) && inv.is_consonant(b) && !inv.is_glottal(b)),
    }
}

/// Per-form phonological measurements independent of corpus context.
#[derive(Debug, Clone, PartialEq)]
pub struct PhonologicalProfile {
    pub char_length: usize,
    pub syllables: usize,
    pub vowel_count: usize,
    pub vowel_ratio: f64,
    pub ends_in_vowel: bool,
    pub has_glottal: bool,
    pub has_nasal_cluster: bool,
    pub has_reduplication: bool,
    pub consonant_cluster_count: usize,
    pub has_an_prefix: bool,
    /// Index into the onset classes; `onset_classes.len()` means "other".
    pub onset_class: usize,
}

/// Surface string analysed for a form under the spec's mode.
pub fn analysis_form(form: &LexicalForm, spec: &FeatureSpec) -> String {
    let folded = fold(&form.clean_form);
    match spec.mode {
        Mode::Orthographic => folded,
        Mode::Ipa => to_ipa(&folded, &form.language_id, &spec.inventories.digraphs),
    }
}

pub fn profile(surface: &str, spec: &FeatureSpec) -> PhonologicalProfile {
    let inv = &spec.inventories;
    let letters: Vec<char> = surface.chars().filter(|c| !is_separator(*c)).collect();
    let vowel_count = letters.iter().filter(|c| inv.is_vowel(**c)).count();
    let char_length = letters.len();
    let onset_class = letters
        .first()
        .and_then(|c| inv.onset_classes.iter().position(|o| o == c))
        .unwrap_or(inv.onset_classes.len());
    PhonologicalProfile {
        char_length,
        syllables: count_syllables(surface, &inv.vowels),
        vowel_count,
        vowel_ratio: if char_length == 0 {
            0.0
        } else {
            vowel_count as f64 / char_length as f64
        },
        ends_in_vowel: letters.last().is_some_and(|c| inv.is_vowel(*c)),
        has_glottal: letters.iter().any(|c| inv.is_glottal(*c)),
        has_nasal_cluster: has_nasal_cluster(surface, spec),
        has_reduplication: detect_reduplication(surface),
        consonant_cluster_count: count_consonant_clusters(surface, inv),
        has_an_prefix: detect_prefix(surface, &inv.prefixes, &inv.vowels),
        onset_class,
    }
}

/// How to treat languages that the context has not seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnseenLanguages {
    Reject,
    /// Reserved language code; coverage computed from the scored rows' own
    /// cognacy coding.
    Unknown,
}

/// Statistics that features read from the training portion of a corpus.
/// Built only from training rows, so it never sees test labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusContext {
    pub language_codes: BTreeMap<String, usize>,
    pub coverage: BTreeMap<String, f64>,
    /// cognate code → training form ids carrying it
    code_members: BTreeMap<String, BTreeSet<String>>,
    concept_positive_rate: BTreeMap<String, f64>,
    concept_positive_languages: BTreeMap<String, usize>,
}

impl CorpusContext {
    /// Context from the rows of `labeled` selected by `train`.
    pub fn from_rows(labeled: &LabeledCorpus, train: &[usize], target: TargetPolicy) -> Self {
        let forms = labeled.corpus.forms();
        let labels = labeled.labels();
        let mut lang_counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        let mut code_members: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut concept_counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
        let mut concept_langs: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for &i in train {
            let f = &forms[i];
            let e = lang_counts.entry(&f.language_id).or_default();
            e.0 += 1;
            if f.is_coded() {
                e.1 += 1;
            }
            for code in &f.cognate_codes {
                code_members
                    .entry(code.clone())
                    .or_default()
                    .insert(f.form_id.clone());
            }
            let positive = target.is_positive(f, labels[i]);
            let c = concept_counts.entry(&f.concept_id).or_default();
            c.0 += 1;
            if positive {
                c.1 += 1;
                concept_langs
                    .entry(&f.concept_id)
                    .or_default()
                    .insert(&f.language_id);
            }
        }
        CorpusContext {
            language_codes: lang_counts
                .keys()
                .enumerate()
                .map(|(i, l)| (l.to_string(), i))
                .collect(),
            coverage: lang_counts
                .iter()
                .map(|(l, (n, coded))| (l.to_string(), *coded as f64 / *n as f64))
                .collect(),
            code_members,
            concept_positive_rate: concept_counts
                .iter()
                .map(|(c, (n, pos))| (c.to_string(), *pos as f64 / *n as f64))
                .collect(),
            concept_positive_languages: concept_langs
                .into_iter()
                .map(|(c, langs)| (c.to_string(), langs.len()))
                .collect(),
        }
    }

    pub fn from_all(labeled: &LabeledCorpus, target: TargetPolicy) -> Self {
        let all: Vec<usize> = (0..labeled.len()).collect();
        Self::from_rows(labeled, &all, target)
    }

    fn cognate_set_size(&self, form: &LexicalForm) -> usize {
        let mut members: BTreeSet<&str> = BTreeSet::new();
        for code in &form.cognate_codes {
            if let Some(m) = self.code_members.get(code) {
                members.extend(m.iter().map(String::as_str));
            }
        }
        members.remove(form.form_id.as_str());
        members.len()
    }
}

/// Coverage for languages missing from `ctx`, computed from `rows` of `labeled`.
fn fallback_coverage(
    labeled: &LabeledCorpus,
    rows: &[usize],
    ctx: &CorpusContext,
) -> HashMap<String, f64> {
    let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
    for &i in rows {
        let f = &labeled.corpus.forms()[i];
        if ctx.coverage.contains_key(&f.language_id) {
            continue;
        }
        let e = counts.entry(&f.language_id).or_default();
        e.0 += 1;
        if f.is_coded() {
            e.1 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(l, (n, c))| (l.to_string(), c as f64 / n as f64))
        .collect()
}

/// Feature row for one form.
pub fn extract_features(
    form: &LexicalForm,
    label: SubtractionLabel,
    labeled: &LabeledCorpus,
    ctx: &CorpusContext,
    spec: &FeatureSpec,
    unseen: UnseenLanguages,
    fallback: &HashMap<String, f64>,
) -> Result<Vec<f64>> {
    let surface = analysis_form(form, spec);
    let p = profile(&surface, spec);
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    let corpus = &labeled.corpus;

    let (lang_code, coverage) = match ctx.language_codes.get(&form.language_id) {
        Some(code) => (*code as f64, ctx.coverage[&form.language_id]),
        None => match unseen {
            UnseenLanguages::Reject => {
                return Err(Error::UnknownLanguage(form.language_id.clone()))
            }
            UnseenLanguages::Unknown => (
                UNKNOWN_LANGUAGE_CODE,
                fallback.get(&form.language_id).copied().unwrap_or(0.0),
            ),
        },
    };

    let mut row = Vec::with_capacity(32);
    match spec.length_metric {
        LengthMetric::CharCount => row.push(p.char_length as f64),
        LengthMetric::SyllableCount => row.push(p.syllables as f64),
        LengthMetric::Omit => {}
    }
    row.extend([
        p.vowel_count as f64,
        p.vowel_ratio,
        b(p.ends_in_vowel),
        b(p.has_glottal),
        b(p.has_nasal_cluster),
        b(p.has_reduplication),
        p.consonant_cluster_count as f64,
        b(p.has_an_prefix),
    ]);
    for k in 0..=spec.inventories.onset_classes.len() {
        row.push(b(k == p.onset_class));
    }
    row.push(b(corpus.is_swadesh100(&form.concept_id)));
    let domain = corpus.domain(&form.concept_id);
    for d in Domain::ALL {
        row.push(b(d == domain));
    }
    if spec.variant != Variant::Pure {
        row.push(lang_code);
    }
    if matches!(spec.variant, Variant::ModelA | Variant::ModelB) {
        row.push(coverage);
    }
    if spec.variant == Variant::ModelA {
        row.push(ctx.cognate_set_size(form) as f64);
        row.push(form.cognate_codes.len() as f64);
        row.push(
            ctx.concept_positive_rate
                .get(&form.concept_id)
                .copied()
                .unwrap_or(0.0),
        );
        row.push(
            ctx.concept_positive_languages
                .get(&form.concept_id)
                .copied()
                .unwrap_or(0) as f64,
        );
    }
    if spec.leak_canary {
        row.push(b(spec.target.is_positive(form, label)));
    }
    Ok(row)
}

/// Numeric design matrix with labels and per-row language groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub row_ids: Vec<String>,
    pub groups: Vec<String>,
    pub labels: Vec<bool>,
    data: Vec<f64>,
    pub spec: Option<FeatureSpec>,
}

impl FeatureMatrix {
    /// Builds a matrix from explicit rows (synthetic data, tests).
    pub fn from_rows(names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<bool>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut data = Vec::with_capacity(rows.len() * names.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != names.len() {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} values, expected {}",
                    r.len(),
                    names.len()
                )));
            }
            data.extend_from_slice(r);
        }
        let n = rows.len();
        Ok(FeatureMatrix {
            names,
            row_ids: (0..n).map(|i| i.to_string()).collect(),
            groups: vec![String::new(); n],
            labels,
            data,
            spec: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols() + j]
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.names.iter().position(|n| n == name)?;
        Some((0..self.n_rows()).map(|i| self.value(i, j)).collect())
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    /// Row subset in the given order.
    pub fn select(&self, rows: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols());
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            names: self.names.clone(),
            row_ids: rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            groups: rows.iter().map(|&i| self.groups[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            data,
            spec: self.spec.clone(),
        }
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["form_id".to_string(), "language_id".into(), "label".into()];
        header.extend(self.names.iter().cloned());
        wtr.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![
                self.row_ids[i].clone(),
                self.groups[i].clone(),
                u8::from(self.labels[i]).to_string(),
            ];
            rec.extend(self.row(i).iter().map(|v| format!("{v}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush().map_err(|e| Error::io("<matrix writer>", e))?;
        Ok(())
    }

    /// JSON sidecar describing the spec and column order.
    pub fn spec_sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "spec": self.spec,
            "columns": self.names,
            "rows": self.n_rows(),
            "positives": self.positives(),
        })
    }
}

/// Builds feature rows for `rows` of `labeled` against a fixed context.
pub fn build_rows(
    labeled: &LabeledCorpus,
    rows: &[usize],
    ctx: &CorpusContext,
    spec: &FeatureSpec,
    unseen: UnseenLanguages,
) -> Result<FeatureMatrix> {
    let forms = labeled.corpus.forms();
    let labels = labeled.labels();
    let fallback = fallback_coverage(labeled, rows, ctx);
    let names = spec.feature_names();
    let mut data = Vec::with_capacity(rows.len() * names.len());
    for &i in rows {
        let r = extract_features(&forms[i], labels[i], labeled, ctx, spec, unseen, &fallback)?;
        debug_assert_eq!(r.len(), names.len());
        data.extend(r);
    }
    Ok(FeatureMatrix {
        names,
        row_ids: rows.iter().map(|&i| forms[i].form_id.clone()).collect(),
        groups: rows.iter().map(|&i| forms[i].language_id.clone()).collect(),
        labels: rows
            .iter()
            .map(|&i| spec.target.is_positive(&forms[i], labels[i]))
            .collect(),
        data,
        spec: Some(spec.clone()),
    })
}

/// Whole-corpus matrix: context from every row, rows in corpus order.
pub fn build_matrix(labeled: &LabeledCorpus, spec: &FeatureSpec) -> Result<FeatureMatrix> {
    let ctx = CorpusContext::from_all(labeled, spec.target);
    let all: Vec<usize> = (0..labeled.len()).collect();
    build_rows(labeled, &all, &ctx, spec, UnseenLanguages::Reject)
}

/// Counts the forms whose surface changes under IPA conversion, per language.
pub fn ipa_incidence(labeled: &LabeledCorpus, inv: &Inventories) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for f in labeled.corpus.forms() {
        let folded = fold(&f.clean_form);
        if to_ipa(&folded, &f.language_id, &inv.digraphs) != folded {
            *out.entry(f.language_id.clone()).or_insert(0) += 1;
        }
    }
    out
}

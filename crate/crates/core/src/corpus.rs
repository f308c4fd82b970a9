// SPDX-License-Identifier: Apache-2.0

//! Wordlist ingestion: cleaning raw forms and indexing a CLDF-style form
//! table into an immutable [`CorpusTable`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Characters that mark a glottal stop in ABVD-style orthographies.
pub const DEFAULT_GLOTTAL_MARKERS: [char; 4] = ['\'', 'ʔ', 'ʻ', '’'];

/// One wordlist entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalForm {
    pub form_id: String,
    pub language_id: String,
    pub concept_id: String,
    pub concept_gloss: String,
    pub raw_form: String,
    pub clean_form: String,
    pub cognate_codes: BTreeSet<String>,
    pub loan_flag: bool,
}

impl LexicalForm {
    pub fn is_coded(&self) -> bool {
        !self.cognate_codes.is_empty()
    }
}

/// Coarse semantic domain of a concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Domain {
    Action,
    Body,
    Nature,
    Quality,
    Number,
    Grammar,
    Other,
}

impl Domain {
    pub const ALL: [Domain; 7] = [
        Domain::Action,
        Domain::Body,
        Domain::Nature,
        Domain::Quality,
        Domain::Number,
        Domain::Grammar,
        Domain::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Action => "ACTION",
            Domain::Body => "BODY",
            Domain::Nature => "NATURE",
            Domain::Quality => "QUALITY",
            Domain::Number => "NUMBER",
            Domain::Grammar => "GRAMMAR",
            Domain::Other => "OTHER",
        }
    }

    pub fn index(self) -> usize {
        Domain::ALL.iter().position(|d| *d == self).unwrap_or(6)
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Domain::ALL
            .iter()
            .copied()
            .find(|d| d.as_str() == up)
            .ok_or_else(|| Error::Config(format!("unknown semantic domain {s:?}")))
    }
}

/// Immutable, indexed collection of forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusTable {
    forms: Vec<LexicalForm>,
    languages: Vec<String>,
    concepts: Vec<String>,
    swadesh100: BTreeSet<String>,
    domain_map: BTreeMap<String, Domain>,
}

impl CorpusTable {
    /// Builds the language/concept indexes. Concepts missing from
    /// `domain_map` are mapped to [`Domain::Other`].
    pub fn new(
        forms: Vec<LexicalForm>,
        swadesh100: BTreeSet<String>,
        mut domain_map: BTreeMap<String, Domain>,
    ) -> Self {
        let languages: BTreeSet<&str> = forms.iter().map(|f| f.language_id.as_str()).collect();
        let concepts: BTreeSet<&str> = forms.iter().map(|f| f.concept_id.as_str()).collect();
        for c in &concepts {
            domain_map.entry((*c).to_string()).or_insert(Domain::Other);
        }
        let languages = languages.into_iter().map(str::to_string).collect();
        let concepts = concepts.into_iter().map(str::to_string).collect();
        CorpusTable {
            forms,
            languages,
            concepts,
            swadesh100,
            domain_map,
        }
    }

    pub fn forms(&self) -> &[LexicalForm] {
        &self.forms
    }

    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn concepts(&self) -> &[String] {
        &self.concepts
    }

    pub fn swadesh100(&self) -> &BTreeSet<String> {
        &self.swadesh100
    }

    pub fn domain_map(&self) -> &BTreeMap<String, Domain> {
        &self.domain_map
    }

    pub fn domain(&self, concept_id: &str) -> Domain {
        self.domain_map
            .get(concept_id)
            .copied()
            .unwrap_or(Domain::Other)
    }

    pub fn is_swadesh100(&self, concept_id: &str) -> bool {
        self.swadesh100.contains(concept_id)
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Gloss for a concept id, falling back to the id itself.
    pub fn gloss<'a>(&'a self, concept_id: &'a str) -> &'a str {
        self.forms
            .iter()
            .find(|f| f.concept_id == concept_id)
            .map(|f| f.concept_gloss.as_str())
            .unwrap_or(concept_id)
    }

    /// A new table restricted to forms for which `keep` returns true. The
    /// sidecar metadata is carried over unchanged.
    pub fn filtered(&self, mut keep: impl FnMut(&LexicalForm) -> bool) -> CorpusTable {
        let forms = self.forms.iter().filter(|f| keep(f)).cloned().collect();
        CorpusTable::new(forms, self.swadesh100.clone(), self.domain_map.clone())
    }
}

/// Column names and parsing options for a form table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub id_column: String,
    pub language_column: String,
    pub concept_column: String,
    /// Optional; the concept id is used as gloss when the column is absent.
    pub gloss_column: String,
    pub form_column: String,
    pub cognacy_column: String,
    pub loan_column: String,
    pub delimiter: char,
    pub cognacy_separator: char,
    pub glottal_markers: Vec<char>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            id_column: "ID".into(),
            language_column: "Language_ID".into(),
            concept_column: "Parameter_ID".into(),
            gloss_column: "Parameter_Name".into(),
            form_column: "Form".into(),
            cognacy_column: "Cognacy".into(),
            loan_column: "Loan".into(),
            delimiter: ',',
            cognacy_separator: ',',
            glottal_markers: DEFAULT_GLOTTAL_MARKERS.to_vec(),
        }
    }
}

impl IngestConfig {
    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .map_err(|_| Error::Config(format!("delimiter {:?} is not ASCII", self.delimiter)))
    }
}

/// Cleans a raw form: lowercase + NFC, drop bracketed spans, collapse
/// whitespace, then strip leading/trailing punctuation and whitespace.
/// Characters in `glottal_markers` are never stripped.
pub fn clean_form(raw: &str, glottal_markers: &[char]) -> Result<String> {
    let lowered: String = raw.to_lowercase().nfc().collect();

    let mut depth = 0usize;
    let mut unbracketed = String::with_capacity(lowered.len());
    for c in lowered.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth = depth.saturating_sub(1),
            _ if depth == 0 => unbracketed.push(c),
            _ => {}
        }
    }

    let mut collapsed = String::with_capacity(unbracketed.len());
    let mut pending_space = false;
    for c in unbracketed.chars() {
        if c.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !collapsed.is_empty() {
            collapsed.push(' ');
        }
        pending_space = false;
        collapsed.push(c);
    }

    let strip = |c: char| !(c.is_alphanumeric() || glottal_markers.contains(&c));
    let cleaned = collapsed.trim_matches(strip).to_string();
    if cleaned.is_empty() {
        return Err(Error::EmptyForm(raw.to_string()));
    }
    Ok(cleaned)
}

/// A row that could not be ingested.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based data row number (the header is row 0).
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub corpus: CorpusTable,
    pub rejects: Vec<Reject>,
    /// Rows dropped because the cleaned form was empty (also listed in `rejects`).
    pub dropped_empty: usize,
}

fn truthy(s: &str) -> bool {
    matches!(
        s.trim().to_ascii_lowercase().as_str(),
        "true" | "t" | "yes" | "y" | "1"
    )
}

/// Parses a delimited form table.
pub fn parse_corpus<R: Read>(
    reader: R,
    cfg: &IngestConfig,
    swadesh100: BTreeSet<String>,
    domain_map: BTreeMap<String, Domain>,
) -> Result<ParseOutcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(cfg.delimiter_byte()?)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| {
        col(name).ok_or_else(|| Error::MissingColumn {
            column: name.to_string(),
            source_name: "form table".into(),
        })
    };
    let lang_ix = required(&cfg.language_column)?;
    let concept_ix = required(&cfg.concept_column)?;
    let form_ix = required(&cfg.form_column)?;
    let cog_ix = required(&cfg.cognacy_column)?;
    let loan_ix = required(&cfg.loan_column)?;
    let id_ix = col(&cfg.id_column);
    let gloss_ix = col(&cfg.gloss_column);

    let mut forms = Vec::new();
    let mut rejects = Vec::new();
    let mut dropped_empty = 0;
    let mut seen_ids = BTreeSet::new();

    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejects.push(Reject {
                    row,
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        if record.len() != headers.len() {
            rejects.push(Reject {
                row,
                reason: format!(
                    "expected {} fields, found {}",
                    headers.len(),
                    record.len()
                ),
            });
            continue;
        }
        let field = |ix: usize| record.get(ix).unwrap_or("").trim();
        let language_id = field(lang_ix).to_string();
        let concept_id = field(concept_ix).to_string();
        if language_id.is_empty() || concept_id.is_empty() {
            rejects.push(Reject {
                row,
                reason: "empty language or concept id".into(),
            });
            continue;
        }
        let raw_form = record.get(form_ix).unwrap_or("").to_string();
        let clean = match clean_form(&raw_form, &cfg.glottal_markers) {
            Ok(c) => c,
            Err(_) => {
                dropped_empty += 1;
                log::warn!("row {row}: form {raw_form:?} is empty after cleaning; dropped");
                rejects.push(Reject {
                    row,
                    reason: "empty form after cleaning".into(),
                });
                continue;
            }
        };
        let form_id = match id_ix.map(field) {
            Some(id) if !id.is_empty() => id.to_string(),
            _ => format!("row-{row}"),
        };
        if !seen_ids.insert(form_id.clone()) {
            rejects.push(Reject {
                row,
                reason: format!("duplicate form id {form_id:?}"),
            });
            continue;
        }
        let cognate_codes = field(cog_ix)
            .split(cfg.cognacy_separator)
            .map(str::trim)
            .filter(|c| !c.is_empty())
            .map(str::to_string)
            .collect();
        let concept_gloss = match gloss_ix.map(field) {
            Some(g) if !g.is_empty() => g.to_string(),
            _ => concept_id.clone(),
        };
        forms.push(LexicalForm {
            form_id,
            language_id,
            concept_id,
            concept_gloss,
            raw_form,
            clean_form: clean,
            cognate_codes,
            loan_flag: truthy(field(loan_ix)),
        });
    }

    Ok(ParseOutcome {
        corpus: CorpusTable::new(forms, swadesh100, domain_map),
        rejects,
        dropped_empty,
    })
}

/// Writes the corpus back out as a form table using `cfg`'s column names.
pub fn write_corpus<W: Write>(corpus: &CorpusTable, writer: W, cfg: &IngestConfig) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(cfg.delimiter_byte()?)
        .from_writer(writer);
    wtr.write_record([
        &cfg.id_column,
        &cfg.language_column,
        &cfg.concept_column,
        &cfg.gloss_column,
        &cfg.form_column,
        &cfg.cognacy_column,
        &cfg.loan_column,
    ])?;
    let sep = cfg.cognacy_separator.to_string();
    for f in corpus.forms() {
        let codes: Vec<&str> = f.cognate_codes.iter().map(String::as_str).collect();
        wtr.write_record([
            f.form_id.as_str(),
            &f.language_id,
            &f.concept_id,
            &f.concept_gloss,
            &f.raw_form,
            &codes.join(&sep),
            if f.loan_flag { "True" } else { "False" },
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<corpus writer>", e))?;
    Ok(())
}

pub fn write_rejects<W: Write>(rejects: &[Reject], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["row", "reason"])?;
    for r in rejects {
        wtr.write_record([r.row.to_string(), r.reason.clone()])?;
    }
    wtr.flush().map_err(|e| Error::io("<reject writer>", e))?;
    Ok(())
}

/// Reads a concept list: one id per line, `#` starts a comment.
pub fn read_concept_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

/// Reads a two-column `concept_id,DOMAIN` map. A header row is tolerated.
pub fn read_domain_map(text: &str, delimiter: char) -> Result<BTreeMap<String, Domain>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(2, delimiter);
        let concept = parts.next().unwrap_or("").trim();
        let domain = parts.next().unwrap_or("").trim();
        match domain.parse::<Domain>() {
            Ok(d) => {
                map.insert(concept.to_string(), d);
            }
            Err(_) if i == 0 => {} // header
            Err(e) => return Err(e),
        }
    }
    Ok(map)
}

/// Loads a form table plus optional sidecars from disk.
pub fn load_corpus(
    forms_path: &Path,
    cfg: &IngestConfig,
    swadesh100_path: Option<&Path>,
    domain_map_path: Option<&Path>,
) -> Result<ParseOutcome> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
    let swadesh = match swadesh100_path {
        Some(p) => read_concept_list(&read(p)?),
        None => BTreeSet::new(),
    };
    let domains = match domain_map_path {
        Some(p) => read_domain_map(&read(p)?, cfg.delimiter)?,
        None => BTreeMap::new(),
    };
    let file = std::fs::File::open(forms_path).map_err(|e| Error::io(forms_path, e))?;
    parse_corpus(std::io::BufReader::new(file), cfg, swadesh, domains)
}

/// Per-language form count and cognacy coverage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageStats {
    pub language_id: String,
    pub forms: usize,
    pub coded: usize,
    pub coverage: f64,
}

pub fn corpus_stats(corpus: &CorpusTable) -> Result<Vec<LanguageStats>> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("corpus is empty".into()));
    }
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for f in corpus.forms() {
        let e = counts.entry(&f.language_id).or_default();
        e.0 += 1;
        if f.is_coded() {
            e.1 += 1;
        }
    }
    Ok(counts
        .into_iter()
        .map(|(lang, (forms, coded))| LanguageStats {
            language_id: lang.to_string(),
            forms,
            coded,
            coverage: coded as f64 / forms as f64,
        })
        .collect())
}

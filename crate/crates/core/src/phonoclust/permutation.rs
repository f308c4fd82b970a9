// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distance::norm_levenshtein;
use crate::error::{Error, Result};
use crate::evaluate::MeanSd;
use crate::labeler::LabeledCorpus;

/// How null replicates are generated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullModel {
    /// Redraw the CS set with the same size per language and recompute the
    /// observed statistic.
    #[default]
    Permutation,
    /// One concept drawn from those attested in enough of the CS languages,
    /// one form per language.
    SingleConcept,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CognateTestConfig {
    pub min_languages: usize,
    pub n_null: usize,
    pub seed: u64,
    pub null_model: NullModel,
    /// Use (1 + #{null <= observed}) / (1 + N) instead of the plug-in ratio.
    pub corrected_p: bool,
}

impl Default for CognateTestConfig {
    fn default() -> Self {
        CognateTestConfig {
            min_languages: 3,
            n_null: 1000,
            seed: 0,
            null_model: NullModel::Permutation,
            corrected_p: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptDistance {
    pub concept_id: String,
    pub gloss: String,
    pub languages: usize,
    pub pairs: usize,
    pub mean_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CognateTestResult {
    /// Mean over qualifying concepts of the per-concept mean distance.
    pub observed: f64,
    /// Mean over all cross-language pairs pooled across concepts.
    pub observed_pooled: f64,
    pub concepts: Vec<ConceptDistance>,
    pub null: Vec<f64>,
    pub null_mean: f64,
    pub null_sd: f64,
    pub p_value: f64,
    pub config: CognateTestConfig,
}

/// Per-concept text and language of every corpus row.
struct Index<'a> {
    texts: &'a [String],
    languages: Vec<&'a str>,
    concepts: Vec<&'a str>,
    /// (concept, language) → rows
    cells: BTreeMap<(&'a str, &'a str), Vec<usize>>,
    /// memoized distances between rows of the same concept
    cache: HashMap<(usize, usize), f64>,
}

impl<'a> Index<'a> {
    fn new(labeled: &'a LabeledCorpus, texts: &'a [String]) -> Self {
        let forms = labeled.corpus.forms();
        let mut cells: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
        for (i, f) in forms.iter().enumerate() {
            cells.entry((&f.concept_id, &f.language_id)).or_default().push(i);
        }
        let mut cache = HashMap::new();
        let mut by_concept: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for ((c, _), rows) in &cells {
            by_concept.entry(c).or_default().extend(rows);
        }
        for rows in by_concept.values() {
            for (x, &i) in rows.iter().enumerate() {
                for &j in &rows[x + 1..] {
                    cache.insert((i.min(j), i.max(j)), norm_levenshtein(&texts[i], &texts[j]));
                }
            }
        }
        Index {
            texts,
            languages: forms.iter().map(|f| f.language_id.as_str()).collect(),
            concepts: forms.iter().map(|f| f.concept_id.as_str()).collect(),
            cells,
            cache,
        }
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        match self.cache.get(&(i.min(j), i.max(j))) {
            Some(d) => *d,
            None => norm_levenshtein(&self.texts[i], &self.texts[j]),
        }
    }

    /// Per qualifying concept: (concept, languages, pairs, distance sum).
    fn statistic(&self, members: &[usize], min_languages: usize) -> Vec<(&'a str, usize, usize, f64)> {
        let mut by_concept: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &i in members {
            by_concept.entry(self.concepts[i]).or_default().push(i);
        }
        let mut out = Vec::new();
        for (c, rows) in by_concept {
            let langs: BTreeSet<&str> = rows.iter().map(|&i| self.languages[i]).collect();
            if langs.len() < min_languages {
                continue;
            }
            let (mut pairs, mut sum) = (0usize, 0.0);
            for (x, &i) in rows.iter().enumerate() {
                for &j in &rows[x + 1..] {
                    if self.languages[i] != self.languages[j] {
                        pairs += 1;
                        sum += self.dist(i, j);
                    }
                }
            }
            out.push((c, langs.len(), pairs, sum));
        }
        out
    }
}

fn concept_mean(stat: &[(&str, usize, usize, f64)]) -> Option<f64> {
    if stat.is_empty() {
        return None;
    }
    Some(stat.iter().map(|(_, _, p, s)| s / *p as f64).sum::<f64>() / stat.len() as f64)
}

const MAX_REDRAWS: usize = 100;

/// Tests whether CS forms of the same concept are more similar across
/// languages than chance. `texts` holds the compared surface per corpus row
/// and `cs` marks the CS rows.
pub fn cognate_permutation_test(
    labeled: &LabeledCorpus,
    texts: &[String],
    cs: &[bool],
    cfg: &CognateTestConfig,
) -> Result<CognateTestResult> {
    if texts.len() != labeled.len() || cs.len() != labeled.len() {
        return Err(Error::InvalidInput("texts and CS mask must cover every corpus row".into()));
    }
    if cfg.n_null == 0 {
        return Err(Error::Config("n_null must be at least 1".into()));
    }
    let idx = Index::new(labeled, texts);
    let members: Vec<usize> = (0..cs.len()).filter(|&i| cs[i]).collect();
    let stat = idx.statistic(&members, cfg.min_languages);
    let observed = concept_mean(&stat).ok_or_else(|| {
        Error::InvalidInput(format!(
            "no concept has CS forms in {} or more languages",
            cfg.min_languages
        ))
    })?;
    let total_pairs: usize = stat.iter().map(|s| s.2).sum();
    let observed_pooled = stat.iter().map(|s| s.3).sum::<f64>() / total_pairs as f64;
    let concepts = stat
        .iter()
        .map(|(c, langs, pairs, sum)| ConceptDistance {
            concept_id: c.to_string(),
            gloss: labeled.corpus.gloss(c).to_string(),
            languages: *langs,
            pairs: *pairs,
            mean_distance: sum / *pairs as f64,
        })
        .collect();

    let null: Vec<f64> = match cfg.null_model {
        NullModel::Permutation => permutation_null(&idx, &members, cfg)?,
        NullModel::SingleConcept => single_concept_null(&idx, &members, cfg)?,
    };
    let below = null.iter().filter(|v| **v <= observed).count();
    let p_value = if cfg.corrected_p {
        (1 + below) as f64 / (1 + null.len()) as f64
    } else {
        below as f64 / null.len() as f64
    };
    let ms = MeanSd::of(&null).expect("n_null > 0");
    Ok(CognateTestResult {
        observed,
        observed_pooled,
        concepts,
        null_mean: ms.mean,
        null_sd: ms.sd,
        null,
        p_value,
        config: cfg.clone(),
    })
}

fn replicate_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

fn permutation_null(idx: &Index, members: &[usize], cfg: &CognateTestConfig) -> Result<Vec<f64>> {
    let mut rows_by_lang: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in idx.languages.iter().enumerate() {
        rows_by_lang.entry(l).or_default().push(i);
    }
    let mut cs_per_lang: BTreeMap<&str, usize> = BTreeMap::new();
    for &i in members {
        *cs_per_lang.entry(idx.languages[i]).or_default() += 1;
    }
    (0..cfg.n_null)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, r);
            for _ in 0..MAX_REDRAWS {
                let mut draw = Vec::with_capacity(members.len());
                for (lang, &k) in &cs_per_lang {
                    let pool = &rows_by_lang[lang];
                    draw.extend(index::sample(&mut rng, pool.len(), k).into_iter().map(|x| pool[x]));
                }
                if let Some(v) = concept_mean(&idx.statistic(&draw, cfg.min_languages)) {
                    return Ok(v);
                }
            }
            Err(Error::Undefined("null draws never produced a qualifying concept".into()))
        })
        .collect()
}

fn single_concept_null(idx: &Index, members: &[usize], cfg: &CognateTestConfig) -> Result<Vec<f64>> {
    let langs: BTreeSet<&str> = members.iter().map(|&i| idx.languages[i]).collect();
    let mut per_concept: BTreeMap<&str, Vec<&Vec<usize>>> = BTreeMap::new();
    for ((c, l), rows) in &idx.cells {
        if langs.contains(l) {
            per_concept.entry(c).or_default().push(rows);
        }
    }
    let pool: Vec<Vec<&Vec<usize>>> = per_concept
        .into_values()
        .filter(|cells| cells.len() >= cfg.min_languages.max(2))
        .collect();
    if pool.is_empty() {
        return Err(Error::InvalidInput("no concept qualifies for the null pool".into()));
    }
    Ok((0..cfg.n_null)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, r);
            let cells = &pool[rng.gen_range(0..pool.len())];
            let picked: Vec<usize> = cells
                .iter()
                .map(|rows| *rows.choose(&mut rng).expect("non-empty cell"))
                .collect();
            let (mut pairs, mut sum) = (0usize, 0.0);
            for (x, &i) in picked.iter().enumerate() {
                for &j in &picked[x + 1..] {
                    pairs += 1;
                    sum += idx.dist(i, j);
                }
            }
            sum / pairs as f64
        })
        .collect())
}

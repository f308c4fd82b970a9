// SPDX-License-Identifier: Apache-2.0

//! Agreement between the rule-based labels and classifier probabilities.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::{persistent_concepts, LabeledCorpus, PersistentConcept, Stage};
use crate::phonofeatures::{FeatureMatrix, TargetPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Quadrant {
    /// Rule CANDIDATE, classifier positive.
    CS,
    /// Rule MAINSTREAM, classifier negative.
    CA,
    /// Rule CANDIDATE only.
    RO,
    /// Classifier positive only.
    MO,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::CS, Quadrant::CA, Quadrant::RO, Quadrant::MO];

    pub fn of(rule_candidate: bool, probability: f64, threshold: f64) -> Quadrant {
        match (rule_candidate, probability >= threshold) {
            (true, true) => Quadrant::CS,
            (false, false) => Quadrant::CA,
            (true, false) => Quadrant::RO,
            (false, true) => Quadrant::MO,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Quadrant::CS => "CS",
            Quadrant::CA => "CA",
            Quadrant::RO => "RO",
            Quadrant::MO => "MO",
        }
    }
}

impl fmt::Display for Quadrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantAssignment {
    pub form_id: String,
    pub quadrant: Quadrant,
    pub rule_candidate: bool,
    pub stage: Stage,
    pub probability: f64,
}

/// One assignment per corpus row, in corpus order.
pub fn quadrantize(
    labeled: &LabeledCorpus,
    probabilities: &[f64],
    threshold: f64,
    target: TargetPolicy,
) -> Result<Vec<QuadrantAssignment>> {
    if probabilities.len() != labeled.len() {
        return Err(Error::InvalidInput(format!(
            "{} probabilities for {} forms",
            probabilities.len(),
            labeled.len()
        )));
    }
    labeled
        .corpus
        .forms()
        .iter()
        .zip(labeled.labels())
        .zip(probabilities)
        .map(|((f, l), &p)| {
            if !p.is_finite() {
                return Err(Error::InvalidInput(format!("no probability for form {}", f.form_id)));
            }
            let rule_candidate = target.is_positive(f, *l);
            Ok(QuadrantAssignment {
                form_id: f.form_id.clone(),
                quadrant: Quadrant::of(rule_candidate, p, threshold),
                rule_candidate,
                stage: l.stage,
                probability: p,
            })
        })
        .collect()
}

pub fn write_quadrants<W: Write>(assignments: &[QuadrantAssignment], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["form_id", "quadrant", "probability", "stage"])?;
    for a in assignments {
        wtr.write_record([
            a.form_id.as_str(),
            a.quadrant.as_str(),
            &format!("{:.6}", a.probability),
            a.stage.as_str(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<quadrant writer>", e))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadrantCounts {
    pub cs: usize,
    pub ca: usize,
    pub ro: usize,
    pub mo: usize,
}

impl QuadrantCounts {
    pub fn from_assignments<'a>(it: impl IntoIterator<Item = &'a QuadrantAssignment>) -> Self {
        let mut c = QuadrantCounts::default();
        for a in it {
            c.add(a.quadrant);
        }
        c
    }

    pub fn add(&mut self, q: Quadrant) {
        match q {
            Quadrant::CS => self.cs += 1,
            Quadrant::CA => self.ca += 1,
            Quadrant::RO => self.ro += 1,
            Quadrant::MO => self.mo += 1,
        }
    }

    pub fn get(&self, q: Quadrant) -> usize {
        match q {
            Quadrant::CS => self.cs,
            Quadrant::CA => self.ca,
            Quadrant::RO => self.ro,
            Quadrant::MO => self.mo,
        }
    }

    pub fn total(&self) -> usize {
        self.cs + self.ca + self.ro + self.mo
    }

    /// Percentage of the total.
    pub fn share(&self, q: Quadrant) -> f64 {
        100.0 * self.get(q) as f64 / self.total() as f64
    }
}

/// Cohen's κ for the 2×2 table of rule label against thresholded
/// classifier output.
pub fn cohen_kappa(c: &QuadrantCounts) -> Result<f64> {
    let n = c.total() as f64;
    if c.total() == 0 {
        return Err(Error::Undefined("kappa of an empty table".into()));
    }
    let p_o = (c.cs + c.ca) as f64 / n;
    let rule_yes = (c.cs + c.ro) as f64 / n;
    let ml_yes = (c.cs + c.mo) as f64 / n;
    let p_e = rule_yes * ml_yes + (1.0 - rule_yes) * (1.0 - ml_yes);
    if p_e == 1.0 {
        return if p_o == 1.0 {
            Ok(1.0)
        } else {
            Err(Error::Undefined("chance agreement is 1".into()))
        };
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub pearson: f64,
    pub spearman: f64,
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation with a zero-variance vector".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// 1-based ranks, ties sharing their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn label_correlations(probabilities: &[f64], labels: &[bool]) -> Result<Correlations> {
    if probabilities.len() != labels.len() {
        return Err(Error::InvalidInput("one probability per label required".into()));
    }
    if labels.len() < 3 {
        return Err(Error::Undefined("correlations need at least 3 points".into()));
    }
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    Ok(Correlations {
        pearson: pearson(probabilities, &y)?,
        spearman: pearson(&average_ranks(probabilities), &average_ranks(&y))?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub quadrant: Quadrant,
    pub n: usize,
    /// Aligned with the requested feature list.
    pub means: Vec<f64>,
}

pub const DEFAULT_PROFILE_FEATURES: [&str; 3] =
    ["form_length", "has_glottal", "consonant_cluster_count"];

/// Per-quadrant feature means. Quadrants without members get no row.
pub fn disagreement_profile(
    assignments: &[QuadrantAssignment],
    matrix: &FeatureMatrix,
    features: &[&str],
) -> Result<Vec<ProfileRow>> {
    let cols: Vec<usize> = features
        .iter()
        .map(|f| {
            matrix
                .names
                .iter()
                .position(|n| n == f)
                .ok_or_else(|| Error::InvalidInput(format!("feature {f:?} not in matrix")))
        })
        .collect::<Result<_>>()?;
    let row_of: HashMap<&str, usize> = matrix
        .row_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let mut acc: BTreeMap<Quadrant, (usize, Vec<f64>)> = BTreeMap::new();
    for a in assignments {
        let i = *row_of
            .get(a.form_id.as_str())
            .ok_or_else(|| Error::InvalidInput(format!("form {} has no feature row", a.form_id)))?;
        let e = acc.entry(a.quadrant).or_insert_with(|| (0, vec![0.0; cols.len()]));
        e.0 += 1;
        for (s, &j) in e.1.iter_mut().zip(&cols) {
            *s += matrix.value(i, j);
        }
    }
    Ok(Quadrant::ALL
        .iter()
        .filter_map(|q| {
            acc.get(q).map(|(n, sums)| ProfileRow {
                quadrant: *q,
                n: *n,
                means: sums.iter().map(|s| s / *n as f64).collect(),
            })
        })
        .collect())
}

/// Concepts whose CS forms span at least `min_languages` languages.
pub fn persistent_consensus_concepts(
    labeled: &LabeledCorpus,
    assignments: &[QuadrantAssignment],
    min_languages: usize,
) -> Vec<PersistentConcept> {
    let members = labeled
        .corpus
        .forms()
        .iter()
        .zip(assignments)
        .filter(|(_, a)| a.quadrant == Quadrant::CS)
        .map(|(f, _)| f);
    persistent_concepts(&labeled.corpus, members, min_languages)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    pub key: String,
    pub counts: QuadrantCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusTable {
    pub threshold: f64,
    pub counts: QuadrantCounts,
    pub kappa: Option<f64>,
    pub correlations: Option<Correlations>,
    pub by_language: Vec<Breakdown>,
    pub by_domain: Vec<Breakdown>,
    pub by_concept: Vec<Breakdown>,
}

pub fn consensus_table(
    labeled: &LabeledCorpus,
    assignments: &[QuadrantAssignment],
    threshold: f64,
) -> ConsensusTable {
    let counts = QuadrantCounts::from_assignments(assignments);
    let mut lang: BTreeMap<String, QuadrantCounts> = BTreeMap::new();
    let mut dom: BTreeMap<String, QuadrantCounts> = BTreeMap::new();
    let mut con: BTreeMap<String, QuadrantCounts> = BTreeMap::new();
    for (f, a) in labeled.corpus.forms().iter().zip(assignments) {
        lang.entry(f.language_id.clone()).or_default().add(a.quadrant);
        dom.entry(labeled.corpus.domain(&f.concept_id).to_string())
            .or_default()
            .add(a.quadrant);
        con.entry(f.concept_id.clone()).or_default().add(a.quadrant);
    }
    let flat = |m: BTreeMap<String, QuadrantCounts>| {
        m.into_iter().map(|(key, counts)| Breakdown { key, counts }).collect()
    };
    let probs: Vec<f64> = assignments.iter().map(|a| a.probability).collect();
    let labels: Vec<bool> = assignments.iter().map(|a| a.rule_candidate).collect();
    ConsensusTable {
        threshold,
        counts,
        kappa: cohen_kappa(&counts).ok(),
        correlations: label_correlations(&probs, &labels).ok(),
        by_language: flat(lang),
        by_domain: flat(dom),
        by_concept: flat(con),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn counts(cs: usize, mo: usize, ro: usize, ca: usize) -> QuadrantCounts {
        QuadrantCounts { cs, ca, ro, mo }
    }

    #[test]
    fn quadrant_rules() {
        assert_eq!(Quadrant::of(true, 0.7, 0.5), Quadrant::CS);
        assert_eq!(Quadrant::of(false, 0.5, 0.5), Quadrant::MO);
        assert_eq!(Quadrant::of(true, 0.49, 0.5), Quadrant::RO);
        assert_eq!(Quadrant::of(false, 0.1, 0.5), Quadrant::CA);
    }

    #[test]
    fn kappa_examples() {
        // p_o = 1144/1357; p_e from the marginals 438/1357 and 307/1357
        let c = counts(266, 41, 172, 878);
        let n = 1357.0;
        let p_o = 1144.0 / n;
        let p_e = (438.0 / n) * (307.0 / n) + (919.0 / n) * (1050.0 / n);
        assert!((cohen_kappa(&c).unwrap() - (p_o - p_e) / (1.0 - p_e)).abs() < 1e-15);
        assert!((cohen_kappa(&c).unwrap() - 0.611).abs() < 0.001);
        assert_eq!(cohen_kappa(&counts(5, 0, 0, 5)).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&counts(25, 25, 25, 25)).unwrap(), 0.0);
        assert_eq!(cohen_kappa(&counts(0, 0, 0, 9)).unwrap(), 1.0);
        assert!(cohen_kappa(&QuadrantCounts::default()).is_err());
    }

    #[test]
    fn shares() {
        let c = counts(266, 41, 172, 878);
        assert!((c.share(Quadrant::CS) - 19.6).abs() < 0.05);
        assert!((c.share(Quadrant::CA) - 64.7).abs() < 0.05);
        assert!((c.share(Quadrant::RO) - 12.7).abs() < 0.05);
        assert!((c.share(Quadrant::MO) - 3.0).abs() < 0.05);
    }

    #[test]
    fn correlation_examples() {
        let labels = [true, false, true, false, false];
        let same: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
        let c = label_correlations(&same, &labels).unwrap();
        assert!((c.pearson - 1.0).abs() < 1e-15 && (c.spearman - 1.0).abs() < 1e-15);
        let flip: Vec<f64> = same.iter().map(|v| 1.0 - v).collect();
        assert!((label_correlations(&flip, &labels).unwrap().pearson + 1.0).abs() < 1e-15);
        // by hand: p = [0.9, 0.2, 0.6, 0.4, 0.1], y = [1,0,1,0,0]
        // mean p = 0.44, mean y = 0.4
        let p = [0.9, 0.2, 0.6, 0.4, 0.1];
        let c = label_correlations(&p, &labels).unwrap();
        let sxy = 0.46 * 0.6 + (-0.24) * (-0.4) + 0.16 * 0.6 + (-0.04) * (-0.4) + (-0.34) * (-0.4);
        let sxx: f64 = [0.46f64, -0.24, 0.16, -0.04, -0.34].iter().map(|v| v * v).sum();
        let syy = 3.0 * 0.16 + 2.0 * 0.36;
        assert!((c.pearson - sxy / (sxx * syy).sqrt()).abs() < 1e-12);
        // ranks of p: [5,2,4,3,1]; ranks of y: positives 4.5, negatives 2
        let rp = [5.0, 2.0, 4.0, 3.0, 1.0];
        let ry = [4.5, 2.0, 4.5, 2.0, 2.0];
        assert!((c.spearman - pearson(&rp, &ry).unwrap()).abs() < 1e-15);
        assert!(label_correlations(&[0.5; 4], &[true, false, true, false]).is_err());
    }

    #[test]
    fn average_ranks_with_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    proptest! {
        #[test]
        fn kappa_invariant_under_class_swap(cs in 0usize..200, ca in 0usize..200, ro in 0usize..200, mo in 0usize..200) {
            let a = counts(cs, mo, ro, ca);
            let b = QuadrantCounts { cs: ca, ca: cs, ro: mo, mo: ro };
            match (cohen_kappa(&a), cohen_kappa(&b)) {
                (Ok(x), Ok(y)) => prop_assert!((x - y).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false),
            }
        }
    }
}

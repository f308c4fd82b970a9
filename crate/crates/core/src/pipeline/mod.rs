// SPDX-License-Identifier: Apache-2.0

//! Batch orchestration behind the `lexstrata` binary.
//!
//! Each subcommand reads the artifacts of its upstream steps from the output
//! directory, writes its own, and records content hashes of both in
//! `manifest.json`. Outputs depend only on the config and input files, so a
//! rerun with unchanged inputs rewrites identical bytes.

mod config;
mod manifest;
pub mod plots;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

pub use config::{
    ClusterSection, CognateSection, ConsensusSection, EvalSection, FeatureSection, ModelSection,
    Paths, PipelineConfig, ProbabilitySource,
};
pub use manifest::{sha256_file, sha256_hex, InputEntry, Manifest, StepRecord, MANIFEST_FILE};

use crate::attribution::{explain, global_importance};
use crate::consensus::{
    consensus_table, disagreement_profile, persistent_consensus_concepts, quadrantize,
    write_quadrants, Quadrant, DEFAULT_PROFILE_FEATURES,
};
use crate::corpus::{corpus_stats, parse_corpus, read_concept_list, read_domain_map, write_corpus, write_rejects, CorpusTable, Domain};
use crate::error::{Error, Result};
use crate::evaluate::{
    fit_full, out_of_fold_probabilities, rows_by_form_id, run_ablation, run_cv, run_ipa_check,
    run_lolo, run_sensitivity_all, score_expansion,
};
use crate::labeler::{
    persistent_residual_concepts, read_loans, read_rescues, residual_table, subtract, LabeledCorpus,
    LoanEntry, RescueEntry, Stage,
};
use crate::learners::{Model, ModelFile};
use crate::phonoclust::{cognate_permutation_test, dbscan_grid, distance_matrix, ward_cluster};
use crate::phonofeatures::{analysis_form, build_matrix, build_rows, CorpusContext, FeatureSpec, UnseenLanguages};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subcommand {
    Ingest,
    Label,
    Features,
    Train,
    Cv,
    Lolo,
    Ablate,
    Sensitivity,
    IpaCheck,
    Shap,
    Consensus,
    Cluster,
    CognateTest,
    Expand,
    Report,
}

impl Subcommand {
    /// Dependency order.
    pub const ALL: [Subcommand; 15] = [
        Subcommand::Ingest,
        Subcommand::Label,
        Subcommand::Features,
        Subcommand::Train,
        Subcommand::Cv,
        Subcommand::Lolo,
        Subcommand::Ablate,
        Subcommand::Sensitivity,
        Subcommand::IpaCheck,
        Subcommand::Shap,
        Subcommand::Consensus,
        Subcommand::Cluster,
        Subcommand::CognateTest,
        Subcommand::Expand,
        Subcommand::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subcommand::Ingest => "ingest",
            Subcommand::Label => "label",
            Subcommand::Features => "features",
            Subcommand::Train => "train",
            Subcommand::Cv => "cv",
            Subcommand::Lolo => "lolo",
            Subcommand::Ablate => "ablate",
            Subcommand::Sensitivity => "sensitivity",
            Subcommand::IpaCheck => "ipa-check",
            Subcommand::Shap => "shap",
            Subcommand::Consensus => "consensus",
            Subcommand::Cluster => "cluster",
            Subcommand::CognateTest => "cognate-test",
            Subcommand::Expand => "expand",
            Subcommand::Report => "report",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Subcommand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand {s:?}")))
    }
}

/// Accumulates what one subcommand reads and writes.
struct Step<'a> {
    out: &'a Path,
    consumed: BTreeMap<String, String>,
    artifacts: BTreeMap<String, String>,
    record: serde_json::Map<String, serde_json::Value>,
}

impl<'a> Step<'a> {
    fn new(out: &'a Path) -> Self {
        Step { out, consumed: BTreeMap::new(), artifacts: BTreeMap::new(), record: serde_json::Map::new() }
    }

    fn require(&mut self, artifact: &str, producer: Subcommand) -> Result<PathBuf> {
        let path = self.out.join(artifact);
        if !path.is_file() {
            return Err(Error::MissingArtifact { artifact: artifact.into(), subcommand: producer.to_string() });
        }
        self.consumed.insert(artifact.into(), sha256_file(&path)?);
        Ok(path)
    }

    /// Like `require`, but absence is not an error.
    fn optional(&mut self, artifact: &str) -> Result<Option<PathBuf>> {
        let path = self.out.join(artifact);
        if !path.is_file() {
            return Ok(None);
        }
        self.consumed.insert(artifact.into(), sha256_file(&path)?);
        Ok(Some(path))
    }

    fn input(&mut self, role: &str, path: &Path) -> Result<()> {
        self.consumed.insert(format!("input:{role}"), sha256_file(path)?);
        Ok(())
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.artifacts.insert(name.into(), sha256_hex(bytes));
        Ok(())
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn note(&mut self, key: &str, value: impl Serialize) {
        self.record.insert(key.into(), serde_json::to_value(value).unwrap_or(serde_json::Value::Null));
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    std::fs::File::open(path).map(std::io::BufReader::new).map_err(|e| Error::io(path, e))
}

/// `form_id → quadrant` from a quadrant table.
fn read_quadrants(path: &Path) -> Result<BTreeMap<String, (Quadrant, f64)>> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let q = Quadrant::ALL
            .into_iter()
            .find(|q| q.as_str() == rec.get(1).unwrap_or(""))
            .ok_or_else(|| Error::InvalidInput(format!("bad quadrant in {}", path.display())))?;
        let p: f64 = rec
            .get(2)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad probability in {}", path.display())))?;
        out.insert(rec.get(0).unwrap_or("").to_string(), (q, p));
    }
    Ok(out)
}

pub struct Pipeline {
    cfg: PipelineConfig,
    spec: FeatureSpec,
    manifest: Manifest,
    config_hash: String,
}

impl Pipeline {
    /// Validates the config, prepares the output directory and loads any
    /// existing manifest.
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.feature_spec()?;
        std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
        let config_hash = sha256_hex(cfg.to_toml()?.as_bytes());
        let mut manifest = Manifest::load(&cfg.out_dir)?.unwrap_or_default();
        manifest.tool = env!("CARGO_PKG_NAME").into();
        manifest.version = env!("CARGO_PKG_VERSION").into();
        manifest.seed = cfg.seed;
        manifest.config_hash = config_hash.clone();
        manifest.config = serde_json::to_value(&cfg)?;
        manifest.inputs = cfg
            .inputs()
            .into_iter()
            .map(|(role, p)| {
                Ok((role.to_string(), InputEntry { path: p.display().to_string(), sha256: sha256_file(p)? }))
            })
            .collect::<Result<_>>()?;
        Ok(Pipeline { cfg, spec, manifest, config_hash })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.out_dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn run(&mut self, cmd: Subcommand) -> Result<()> {
        log::info!("running {cmd}");
        let out = self.cfg.out_dir.clone();
        let mut step = Step::new(&out);
        match cmd {
            Subcommand::Ingest => self.ingest(&mut step)?,
            Subcommand::Label => self.label(&mut step)?,
            Subcommand::Features => self.features(&mut step)?,
            Subcommand::Train => self.train(&mut step)?,
            Subcommand::Cv => self.cv(&mut step)?,
            Subcommand::Lolo => self.lolo(&mut step)?,
            Subcommand::Ablate => self.ablate(&mut step)?,
            Subcommand::Sensitivity => self.sensitivity(&mut step)?,
            Subcommand::IpaCheck => self.ipa_check(&mut step)?,
            Subcommand::Shap => self.shap(&mut step)?,
            Subcommand::Consensus => self.consensus(&mut step)?,
            Subcommand::Cluster => self.cluster(&mut step)?,
            Subcommand::CognateTest => self.cognate_test(&mut step)?,
            Subcommand::Expand => self.expand(&mut step)?,
            Subcommand::Report => report::run(self, &mut step)?,
        }
        let record = StepRecord {
            config_hash: self.config_hash.clone(),
            consumed: step.consumed,
            artifacts: step.artifacts,
            record: serde_json::Value::Object(step.record),
        };
        self.manifest.steps.insert(cmd.to_string(), record);
        self.manifest.save(&out)
    }

    /// Every subcommand in order; `expand` is skipped without an expansion corpus.
    pub fn run_all(&mut self) -> Result<()> {
        for cmd in Subcommand::ALL {
            if cmd == Subcommand::Expand && self.cfg.paths.expansion_corpus.is_none() {
                log::warn!("no expansion corpus configured; skipping expand");
                continue;
            }
            self.run(cmd)?;
        }
        Ok(())
    }

    fn sidecars(&self, step: &mut Step) -> Result<(BTreeSet<String>, BTreeMap<String, Domain>)> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        let swadesh = match &self.cfg.paths.swadesh100 {
            Some(p) => {
                step.input("swadesh100", p)?;
                read_concept_list(&read(p)?)
            }
            None => BTreeSet::new(),
        };
        let domains = match &self.cfg.paths.domain_map {
            Some(p) => {
                step.input("domain_map", p)?;
                read_domain_map(&read(p)?, self.cfg.ingest.delimiter)?
            }
            None => BTreeMap::new(),
        };
        Ok((swadesh, domains))
    }

    fn corpus(&self, step: &mut Step) -> Result<CorpusTable> {
        let path = step.require("corpus.csv", Subcommand::Ingest)?;
        let (swadesh, domains) = self.sidecars(step)?;
        Ok(parse_corpus(open(&path)?, &self.cfg.ingest, swadesh, domains)?.corpus)
    }

    fn labeled(&self, step: &mut Step) -> Result<LabeledCorpus> {
        let corpus = self.corpus(step)?;
        let path = step.require("labels.csv", Subcommand::Label)?;
        LabeledCorpus::with_label_table(corpus, open(&path)?)
    }

    fn trained(&self, step: &mut Step) -> Result<(Model, CorpusContext)> {
        let model = step.require("model.json", Subcommand::Train)?;
        let ctx = step.require("context.json", Subcommand::Train)?;
        let file = ModelFile::from_json(&std::fs::read_to_string(&model).map_err(|e| Error::io(&model, e))?)?;
        if let Some(h) = &file.spec_hash {
            if *h != self.spec_hash()? {
                return Err(Error::Config(
                    "model.json was trained with a different feature spec; rerun `lexstrata train`".into(),
                ));
            }
        }
        Ok((file.model, read_json(&ctx)?))
    }

    fn spec_hash(&self) -> Result<String> {
        Ok(sha256_hex(serde_json::to_string(&self.spec)?.as_bytes()))
    }

    fn subtraction_lists(&self, step: &mut Step) -> Result<(Vec<LoanEntry>, Vec<RescueEntry>)> {
        let loans = match &self.cfg.paths.loans {
            Some(p) => {
                step.input("loans", p)?;
                read_loans(open(p)?)?
            }
            None => Vec::new(),
        };
        let rescues = match &self.cfg.paths.rescues {
            Some(p) => {
                step.input("rescues", p)?;
                read_rescues(open(p)?)?
            }
            None => Vec::new(),
        };
        Ok((loans, rescues))
    }

    fn ingest(&self, step: &mut Step) -> Result<()> {
        let p = &self.cfg.paths;
        step.input("corpus", &p.corpus)?;
        let (swadesh, domains) = self.sidecars(step)?;
        let outcome = parse_corpus(open(&p.corpus)?, &self.cfg.ingest, swadesh, domains)?;
        let corpus = &outcome.corpus;
        step.write_with("corpus.csv", |w| write_corpus(corpus, w, &self.cfg.ingest))?;
        step.write_with("rejects.csv", |w| write_rejects(&outcome.rejects, w))?;
        let stats = corpus_stats(corpus)?;
        step.write_json("corpus_stats.json", &stats)?;
        step.note("forms", corpus.len());
        step.note("languages", corpus.languages().len());
        step.note("concepts", corpus.concepts().len());
        step.note("rejects", outcome.rejects.len());
        step.note("dropped_empty", outcome.dropped_empty);
        Ok(())
    }

    fn label(&self, step: &mut Step) -> Result<()> {
        let corpus = self.corpus(step)?;
        let (loans, rescues) = self.subtraction_lists(step)?;
        let labeled = subtract(&corpus, &loans, &rescues, self.cfg.rescue_match);
        step.write_with("labels.csv", |w| labeled.write_labels(w))?;
        let table = residual_table(&labeled);
        step.write_with("table1_residuals.csv", |w| table.write_csv(w))?;
        step.write_json("residual_table.json", &table)?;
        let persistent = persistent_residual_concepts(&labeled, self.cfg.consensus.min_languages);
        step.write_with("persistent_residuals.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["concept_id", "gloss", "languages"])?;
            for c in &persistent {
                wtr.write_record([c.concept_id.clone(), c.gloss.clone(), c.languages.to_string()])?;
            }
            wtr.flush().map_err(|e| Error::io("persistent_residuals.csv", e))
        })?;
        step.write_with("rescue_log.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["form_id", "entry_index", "proto_form"])?;
            for h in &labeled.rescue_log {
                wtr.write_record([h.form_id.clone(), h.entry_index.to_string(), h.proto_form.clone()])?;
            }
            wtr.flush().map_err(|e| Error::io("rescue_log.csv", e))
        })?;
        let counts: BTreeMap<&str, usize> = [Stage::AbvdCognate, Stage::LoanwordExcluded, Stage::PanRescued, Stage::Residual]
            .into_iter()
            .map(|s| (s.as_str(), labeled.count(s)))
            .collect();
        step.note("stages", counts);
        step.note("mean_residual_pct", table.mean_residual_pct);
        step.note("persistent_concepts", persistent.len());
        Ok(())
    }

    fn features(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        let m = build_matrix(&labeled, &self.spec)?;
        step.write_with("features.csv", |w| m.write_csv(w))?;
        step.write_json("features.spec.json", &m.spec_sidecar())?;
        step.note("rows", m.n_rows());
        step.note("columns", m.n_cols());
        step.note("positives", m.positives());
        Ok(())
    }

    fn train(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        step.require("features.csv", Subcommand::Features)?;
        let trained = fit_full(&labeled, &self.spec, &self.cfg.learner(), self.cfg.seed)?;
        let file = ModelFile::new(trained.model, Some(self.spec_hash()?));
        let mut json = file.to_json()?;
        json.push('\n');
        step.write("model.json", json.as_bytes())?;
        step.write_json("context.json", &trained.context)?;
        step.note("kind", self.cfg.model.kind);
        step.note("rows", trained.matrix.n_rows());
        step.note("positives", trained.matrix.positives());
        Ok(())
    }

    fn cv(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        let summary = run_cv(&labeled, &self.spec, &self.cfg.eval_config())?;
        step.write_with("cv_splits.csv", |w| summary.write_csv(w))?;
        step.write_json("cv_summary.json", &summary)?;
        step.note("splits", summary.split_count());
        step.note("k", self.cfg.eval.k);
        step.note("seeds", &summary.seeds);
        step.note("auc", summary.auc);
        Ok(())
    }

    fn lolo(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        let summary = run_lolo(&labeled, &self.spec, &self.cfg.eval_config())?;
        step.write_with("lolo_splits.csv", |w| summary.write_csv(w))?;
        step.write_json("lolo_summary.json", &summary)?;
        step.note("splits", summary.split_count());
        step.note("auc", summary.auc);
        Ok(())
    }

    fn ablate(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        let rows = run_ablation(&labeled, &self.spec, &self.cfg.eval.ablation, &self.cfg.eval_config())?;
        step.write_json("ablation.json", &rows)?;
        step.write_with("ablation.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["variant", "cv_auc", "cv_auc_sd", "lolo_auc", "delta_cv_auc", "delta_lolo_auc"])?;
            let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            for r in &rows {
                wtr.write_record([
                    r.variant.to_string(),
                    f(r.cv.mean_auc()),
                    f(r.cv.auc.map(|a| a.sd)),
                    f(r.lolo.mean_auc()),
                    f(r.delta_cv_auc),
                    f(r.delta_lolo_auc),
                ])?;
            }
            wtr.flush().map_err(|e| Error::io("ablation.csv", e))
        })?;
        step.note(
            "cv_auc",
            rows.iter().map(|r| (r.variant.to_string(), r.cv.mean_auc())).collect::<BTreeMap<_, _>>(),
        );
        Ok(())
    }

    fn sensitivity(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        let rows = run_sensitivity_all(&labeled, &self.spec, &self.cfg.eval_config())?;
        step.write_json("sensitivity.json", &rows)?;
        step.write_with("sensitivity.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["dropped", "n_dropped", "full_auc", "reduced_auc", "delta_auc"])?;
            let f = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
            for r in &rows {
                wtr.write_record([r.dropped.clone(), r.n_dropped.to_string(), f(r.full_auc), f(r.reduced_auc), f(r.delta_auc)])?;
            }
            wtr.flush().map_err(|e| Error::io("sensitivity.csv", e))
        })?;
        step.note(
            "delta_auc",
            rows.iter().map(|r| (r.dropped.clone(), r.delta_auc)).collect::<BTreeMap<_, _>>(),
        );
        Ok(())
    }

    fn ipa_check(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        let check = run_ipa_check(&labeled, &self.spec, &self.cfg.eval_config())?;
        step.write_json("ipa_check.json", &check)?;
        step.note("altered_forms", check.altered_forms);
        step.note("incidence", &check.incidence);
        step.note("delta_auc", check.delta_auc);
        Ok(())
    }

    /// Matrix in form-id order against the trained context.
    fn scoring_matrix(&self, labeled: &LabeledCorpus, ctx: &CorpusContext, rows: &[usize]) -> Result<crate::phonofeatures::FeatureMatrix> {
        build_rows(labeled, rows, ctx, &self.spec, UnseenLanguages::Reject)
    }

    fn shap(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        let (model, ctx) = self.trained(step)?;
        let ensemble = model
            .as_ensemble()
            .ok_or_else(|| Error::Config("shap needs a tree-ensemble model (gbt or forest)".into()))?;
        let matrix = self.scoring_matrix(&labeled, &ctx, &rows_by_form_id(&labeled))?;
        let set = explain(ensemble, &matrix)?;
        step.write_with("shap.csv", |w| set.write_csv(w))?;
        step.write_json("shap.json", &set)?;
        let importance = global_importance(&set);
        step.write_with("importance.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["feature", "mean_abs"])?;
            for i in &importance {
                wtr.write_record([i.feature.clone(), format!("{:.6}", i.mean_abs)])?;
            }
            wtr.flush().map_err(|e| Error::io("importance.csv", e))
        })?;
        step.note("instances", set.attributions.len());
        step.note("top_feature", importance.first().map(|i| i.feature.clone()));
        Ok(())
    }

    fn consensus(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        let all: Vec<usize> = (0..labeled.len()).collect();
        let c = &self.cfg.consensus;
        let (probs, matrix) = match c.probabilities {
            ProbabilitySource::InSample => {
                let (model, ctx) = self.trained(step)?;
                let m = self.scoring_matrix(&labeled, &ctx, &all)?;
                (model.predict_proba(&m)?, m)
            }
            ProbabilitySource::OutOfFold => {
                let p = out_of_fold_probabilities(&labeled, &self.spec, &self.cfg.eval_config(), self.cfg.seed)?;
                (p, build_matrix(&labeled, &self.spec)?)
            }
        };
        let assignments = quadrantize(&labeled, &probs, c.threshold, self.spec.target)?;
        step.write_with("quadrants.csv", |w| write_quadrants(&assignments, w))?;
        let table = consensus_table(&labeled, &assignments, c.threshold);
        step.write_json("consensus.json", &table)?;
        let features: Vec<&str> = DEFAULT_PROFILE_FEATURES
            .iter()
            .copied()
            .filter(|f| matrix.names.iter().any(|n| n == f))
            .collect();
        let profile = disagreement_profile(&assignments, &matrix, &features)?;
        step.write_with("profile.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            let mut header = vec!["quadrant".to_string(), "n".into()];
            header.extend(features.iter().map(|f| f.to_string()));
            wtr.write_record(&header)?;
            for r in &profile {
                let mut rec = vec![r.quadrant.to_string(), r.n.to_string()];
                rec.extend(r.means.iter().map(|m| format!("{m:.4}")));
                wtr.write_record(&rec)?;
            }
            wtr.flush().map_err(|e| Error::io("profile.csv", e))
        })?;
        let persistent = persistent_consensus_concepts(&labeled, &assignments, c.min_languages);
        step.write_json("persistent_consensus.json", &persistent)?;
        step.note("counts", table.counts);
        step.note("kappa", table.kappa);
        step.note("probabilities", c.probabilities);
        Ok(())
    }

    /// Surface strings of CS forms, in corpus order.
    fn cs_rows(&self, step: &mut Step, labeled: &LabeledCorpus) -> Result<Vec<bool>> {
        let path = step.require("quadrants.csv", Subcommand::Consensus)?;
        let quadrants = read_quadrants(&path)?;
        labeled
            .corpus
            .forms()
            .iter()
            .map(|f| {
                quadrants
                    .get(&f.form_id)
                    .map(|(q, _)| *q == Quadrant::CS)
                    .ok_or_else(|| Error::InvalidInput(format!("form {} missing from quadrants.csv; rerun consensus", f.form_id)))
            })
            .collect()
    }

    fn cluster(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        let cs = self.cs_rows(step, &labeled)?;
        let forms = labeled.corpus.forms();
        let rows: Vec<usize> = (0..forms.len()).filter(|&i| cs[i]).collect();
        if rows.len() < 3 {
            return Err(Error::Undefined(format!("only {} CS forms; clustering needs at least 3", rows.len())));
        }
        let ids: Vec<String> = rows.iter().map(|&i| forms[i].form_id.clone()).collect();
        let texts: Vec<String> = rows.iter().map(|&i| analysis_form(&forms[i], &self.spec)).collect();
        let d = distance_matrix(ids.clone(), &texts)?;
        let cl = &self.cfg.cluster;
        let ward = ward_cluster(&d, cl.k_min, cl.k_max)?;
        let grid = dbscan_grid(&d, &cl.eps, &cl.min_samples)?;
        step.write_with("ward_cuts.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["k", "silhouette"])?;
            for c in &ward.cuts {
                wtr.write_record([c.k.to_string(), c.silhouette.map(|s| format!("{s:.6}")).unwrap_or_default()])?;
            }
            wtr.flush().map_err(|e| Error::io("ward_cuts.csv", e))
        })?;
        step.write_with("dbscan_grid.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["eps", "min_samples", "clusters", "multi_language_clusters", "clustered", "noise_fraction"])?;
            for r in &grid.runs {
                wtr.write_record([
                    format!("{}", r.eps),
                    r.min_samples.to_string(),
                    r.n_clusters.to_string(),
                    r.n_multi.to_string(),
                    r.clustered.to_string(),
                    format!("{:.6}", r.noise_fraction),
                ])?;
            }
            wtr.flush().map_err(|e| Error::io("dbscan_grid.csv", e))
        })?;
        let best = &grid.runs[grid.best];
        let ward_labels = ward.best_k.and_then(|k| ward.cuts.iter().find(|c| c.k == k));
        step.write_with("cluster_labels.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["form_id", "ward", "dbscan"])?;
            for (i, id) in ids.iter().enumerate() {
                wtr.write_record([
                    id.clone(),
                    ward_labels.map(|c| c.labels[i].to_string()).unwrap_or_default(),
                    best.labels[i].map(|l| l.to_string()).unwrap_or_else(|| "noise".into()),
                ])?;
            }
            wtr.flush().map_err(|e| Error::io("cluster_labels.csv", e))
        })?;
        let summary = serde_json::json!({
            "n": rows.len(),
            "ward_best_k": ward.best_k,
            "ward_best_silhouette": ward.best_silhouette,
            "ward_degenerate": ward.degenerate,
            "silhouettes": ward.cuts.iter().map(|c| (c.k, c.silhouette)).collect::<Vec<_>>(),
            "dbscan_best": {"eps": best.eps, "min_samples": best.min_samples, "clusters": best.n_clusters,
                            "noise_fraction": best.noise_fraction},
            "dbscan_no_structure": grid.no_structure,
        });
        step.write_json("cluster.json", &summary)?;
        step.note("n", rows.len());
        step.note("ward_best_silhouette", ward.best_silhouette);
        step.note("dbscan_noise_fraction", best.noise_fraction);
        Ok(())
    }

    fn cognate_test(&self, step: &mut Step) -> Result<()> {
        let labeled = self.labeled(step)?;
        let cs = self.cs_rows(step, &labeled)?;
        let texts: Vec<String> = labeled.corpus.forms().iter().map(|f| analysis_form(f, &self.spec)).collect();
        let result = cognate_permutation_test(&labeled, &texts, &cs, &self.cfg.cognate_config())?;
        step.write_json("cognate_test.json", &result)?;
        step.write_with("null_distribution.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["draw", "statistic"])?;
            for (i, v) in result.null.iter().enumerate() {
                wtr.write_record([i.to_string(), format!("{v:.6}")])?;
            }
            wtr.flush().map_err(|e| Error::io("null_distribution.csv", e))
        })?;
        step.note("observed", result.observed);
        step.note("null_mean", result.null_mean);
        step.note("p_value", result.p_value);
        step.note("concepts", result.concepts.len());
        Ok(())
    }

    fn expand(&self, step: &mut Step) -> Result<()> {
        let (model, ctx) = self.trained(step)?;
        let path = self
            .cfg
            .paths
            .expansion_corpus
            .clone()
            .ok_or_else(|| Error::Config("expand needs paths.expansion_corpus".into()))?;
        step.input("expansion_corpus", &path)?;
        let (swadesh, domains) = self.sidecars(step)?;
        let outcome = parse_corpus(open(&path)?, &self.cfg.ingest, swadesh, domains)?;
        let (loans, rescues) = self.subtraction_lists(step)?;
        let labeled = subtract(&outcome.corpus, &loans, &rescues, self.cfg.rescue_match);
        let mut groups = BTreeMap::new();
        if let Some(g) = &self.cfg.paths.group_map {
            step.input("group_map", g)?;
            let mut rdr = csv::Reader::from_reader(open(g)?);
            for rec in rdr.records() {
                let rec = rec?;
                groups.insert(rec.get(0).unwrap_or("").trim().to_string(), rec.get(1).unwrap_or("").trim().to_string());
            }
        }
        let report = score_expansion(&model, &ctx, &self.spec, &labeled, &groups, self.cfg.eval.threshold)?;
        step.write_json("expansion.json", &report)?;
        step.write_with("expansion_languages.csv", |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(["language", "group", "n_forms", "rule_positive_pct", "predicted_pct", "mean_probability", "auc"])?;
            for l in &report.languages {
                wtr.write_record([
                    l.language_id.clone(),
                    l.group.clone(),
                    l.n_forms.to_string(),
                    format!("{:.2}", l.rule_positive_pct),
                    format!("{:.2}", l.predicted_pct),
                    format!("{:.4}", l.mean_probability),
                    l.auc.map(|a| format!("{a:.4}")).unwrap_or_default(),
                ])?;
            }
            wtr.flush().map_err(|e| Error::io("expansion_languages.csv", e))
        })?;
        step.note("languages", report.languages.len());
        step.note("groups", report.groups.len());
        Ok(())
    }
}

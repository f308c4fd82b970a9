// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::IngestConfig;
use crate::error::{Error, Result};
use crate::evaluate::{EvalConfig, F1Class};
use crate::labeler::RescueMatch;
use crate::learners::{GbtParams, ForestParams, LearnerConfig, LogisticParams, ModelKind};
use crate::phonofeatures::{FeatureSpec, Inventories, LengthMetric, Mode, TargetPolicy, Variant};
use crate::phonoclust::{CognateTestConfig, NullModel};

/// Input files. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub loans: Option<PathBuf>,
    pub rescues: Option<PathBuf>,
    pub swadesh100: Option<PathBuf>,
    pub domain_map: Option<PathBuf>,
    /// TOML file holding an [`Inventories`] table.
    pub inventories: Option<PathBuf>,
    pub expansion_corpus: Option<PathBuf>,
    /// Two columns: `language_id,group`.
    pub group_map: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub variant: Variant,
    pub mode: Mode,
    pub length_metric: LengthMetric,
    pub target: TargetPolicy,
}

impl Default for FeatureSection {
    fn default() -> Self {
        FeatureSection {
            variant: Variant::ModelB,
            mode: Mode::default(),
            length_metric: LengthMetric::default(),
            target: TargetPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub gbt: GbtParams,
    pub forest: ForestParams,
    pub logistic: LogisticParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub k: usize,
    /// Repetitions; seeds are `seed, seed + 1, ...`.
    pub n_seeds: usize,
    pub threshold: f64,
    pub f1_class: F1Class,
    /// Variants compared by `ablate`, in order.
    pub ablation: Vec<Variant>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            k: 5,
            n_seeds: 10,
            threshold: 0.5,
            f1_class: F1Class::default(),
            ablation: vec![Variant::ModelA, Variant::ModelB, Variant::Ablated, Variant::Pure],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilitySource {
    /// Full-corpus model scored on its own training rows.
    #[default]
    InSample,
    OutOfFold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsensusSection {
    pub threshold: f64,
    pub probabilities: ProbabilitySource,
    pub min_languages: usize,
}

impl Default for ConsensusSection {
    fn default() -> Self {
        ConsensusSection { threshold: 0.5, probabilities: ProbabilitySource::InSample, min_languages: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterSection {
    pub k_min: usize,
    pub k_max: usize,
    pub eps: Vec<f64>,
    pub min_samples: Vec<usize>,
}

impl Default for ClusterSection {
    fn default() -> Self {
        ClusterSection {
            k_min: 2,
            k_max: 10,
            eps: vec![0.3, 0.35, 0.4, 0.45, 0.5],
            min_samples: vec![3, 4, 5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CognateSection {
    pub min_languages: usize,
    pub n_null: usize,
    pub null_model: NullModel,
    pub corrected_p: bool,
}

impl Default for CognateSection {
    fn default() -> Self {
        let d = CognateTestConfig::default();
        CognateSection {
            min_languages: d.min_languages,
            n_null: d.n_null,
            null_model: d.null_model,
            corrected_p: d.corrected_p,
        }
    }
}

/// Everything a pipeline run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root seed; every random stream is derived from it.
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Worker cap; 0 uses all cores.
    pub jobs: usize,
    pub rescue_match: RescueMatch,
    pub paths: Paths,
    pub ingest: IngestConfig,
    pub features: FeatureSection,
    pub model: ModelSection,
    pub eval: EvalSection,
    pub consensus: ConsensusSection,
    pub cluster: ClusterSection,
    pub cognate_test: CognateSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            jobs: 0,
            rescue_match: RescueMatch::default(),
            paths: Paths::default(),
            ingest: IngestConfig::default(),
            features: FeatureSection::default(),
            model: ModelSection::default(),
            eval: EvalSection::default(),
            consensus: ConsensusSection::default(),
            cluster: ClusterSection::default(),
            cognate_test: CognateSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        let p = &mut self.paths;
        fix(&mut p.corpus);
        for opt in [
            &mut p.loans,
            &mut p.rescues,
            &mut p.swadesh100,
            &mut p.domain_map,
            &mut p.inventories,
            &mut p.expansion_corpus,
            &mut p.group_map,
        ] {
            if let Some(x) = opt.as_mut() {
                fix(x);
            }
        }
        fix(&mut self.out_dir);
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Every configured input path, by role.
    pub fn inputs(&self) -> Vec<(&'static str, &Path)> {
        let p = &self.paths;
        let mut v: Vec<(&'static str, &Path)> = vec![("corpus", p.corpus.as_path())];
        let opts = [
            ("loans", &p.loans),
            ("rescues", &p.rescues),
            ("swadesh100", &p.swadesh100),
            ("domain_map", &p.domain_map),
            ("inventories", &p.inventories),
            ("expansion_corpus", &p.expansion_corpus),
            ("group_map", &p.group_map),
        ];
        for (name, opt) in opts {
            if let Some(x) = opt {
                v.push((name, x.as_path()));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.corpus.as_os_str().is_empty() {
            return Err(Error::Config("paths.corpus is required".into()));
        }
        for (name, path) in self.inputs() {
            if !path.is_file() {
                return Err(Error::Config(format!("paths.{name}: {} does not exist", path.display())));
            }
        }
        if self.eval.k < 2 {
            return Err(Error::Config("eval.k must be at least 2".into()));
        }
        if self.eval.n_seeds == 0 {
            return Err(Error::Config("eval.n_seeds must be at least 1".into()));
        }
        for (name, t) in [("eval.threshold", self.eval.threshold), ("consensus.threshold", self.consensus.threshold)] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.cluster.k_min < 2 || self.cluster.k_max < self.cluster.k_min {
            return Err(Error::Config("cluster.k_min must be >= 2 and <= k_max".into()));
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.eval.n_seeds as u64).map(|i| self.seed.wrapping_add(i)).collect()
    }

    pub fn inventories(&self) -> Result<Inventories> {
        match &self.paths.inventories {
            None => Ok(Inventories::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn feature_spec(&self) -> Result<FeatureSpec> {
        let f = &self.features;
        let mut spec = FeatureSpec::new(f.variant)
            .with_mode(f.mode)
            .with_length_metric(f.length_metric)
            .with_target(f.target);
        spec.inventories = self.inventories()?;
        Ok(spec)
    }

    pub fn learner(&self) -> LearnerConfig {
        LearnerConfig {
            kind: self.model.kind,
            gbt: GbtParams { seed: self.seed, ..self.model.gbt.clone() },
            forest: ForestParams { seed: self.seed, ..self.model.forest.clone() },
            logistic: self.model.logistic.clone(),
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            learner: self.learner(),
            k: self.eval.k,
            seeds: self.seeds(),
            threshold: self.eval.threshold,
            f1_class: self.eval.f1_class,
        }
    }

    pub fn cognate_config(&self) -> CognateTestConfig {
        let c = &self.cognate_test;
        CognateTestConfig {
            min_languages: c.min_languages,
            n_null: c.n_null,
            seed: self.seed,
            null_model: c.null_model,
            corrected_p: c.corrected_p,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_toml_gives_defaults() {
        let cfg = PipelineConfig::from_toml("").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        assert_eq!(cfg.seeds(), (0..10).collect::<Vec<u64>>());
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = PipelineConfig::default();
        cfg.paths.corpus = "forms.csv".into();
        cfg.features.variant = Variant::Ablated;
        cfg.eval.n_seeds = 3;
        let back = PipelineConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(PipelineConfig::from_toml("sede = 3"), Err(Error::Config(_))));
    }

    #[test]
    fn relative_paths_resolve_against_base() {
        let mut cfg = PipelineConfig::from_toml("[paths]\ncorpus = \"a.csv\"\nloans = \"/abs/l.csv\"").unwrap();
        cfg.resolve(Path::new("/data"));
        assert_eq!(cfg.paths.corpus, PathBuf::from("/data/a.csv"));
        assert_eq!(cfg.paths.loans, Some(PathBuf::from("/abs/l.csv")));
        assert_eq!(cfg.out_dir, PathBuf::from("/data/out"));
    }

    #[test]
    fn missing_input_fails_validation() {
        let mut cfg = PipelineConfig::default();
        cfg.paths.corpus = "/nonexistent/forms.csv".into();
        assert!(matches!(cfg.validate(), Err(Error::Config(m)) if m.contains("paths.corpus")));
    }
}

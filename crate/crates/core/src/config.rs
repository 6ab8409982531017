//! Experiment configuration: one TOML file, hashed into every output.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DatasetSource, FilterConfig};
use crate::error::{Error, Result};
use crate::eval::LogisticConfig;
use crate::irl::TrainConfig;
use crate::seed::sha256_hex;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed; every stage derives its own stream from it.
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Upper bound on worker threads (0 = all cores).
    #[serde(default)]
    pub jobs: usize,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default)]
    pub graph: GraphSettings,
    #[serde(default)]
    pub retrieval: RetrievalSettings,
    #[serde(default)]
    pub features: FeatureSettings,
    /// Reward-model training. `train.seed` is replaced by the master seed.
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub supervised: SupervisedSettings,
    #[serde(default)]
    pub evaluation: EvaluationSettings,
    #[serde(default)]
    pub rerank: RerankSettings,
}

fn default_seed() -> u64 {
    42
}

fn default_output() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSettings {
    /// Minimum number of tag applications for a tag to become a concept.
    pub min_concept_freq: usize,
    /// Most frequent tags included in each item's text document.
    pub top_tags: usize,
}

impl Default for GraphSettings {
    fn default() -> Self {
        GraphSettings {
            min_concept_freq: 5,
            top_tags: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSettings {
    /// Recent positives kept for the history document and the prompt.
    pub k_recent: usize,
    /// Community size.
    pub community_size: usize,
}

impl Default for RetrievalSettings {
    fn default() -> Self {
        RetrievalSettings {
            k_recent: 10,
            community_size: 50,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSettings {
    pub graph_features: bool,
    /// Floating-point type used for features and model parameters.
    pub precision: Precision,
    /// Write the epoch-0 training features to `features.csv`.
    pub dump: bool,
}

impl Default for FeatureSettings {
    fn default() -> Self {
        FeatureSettings {
            graph_features: true,
            precision: Precision::F64,
            dump: false,
        }
    }
}

/// Pointwise baseline: the reward trainer with a linear model and a
/// per-candidate cross-entropy objective on the same candidate sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisedSettings {
    pub l2: f64,
    pub learning_rate: f64,
    /// Full-batch solver settings for fixed feature sets (`fit_logistic`).
    pub full_batch: LogisticConfig,
}

impl Default for SupervisedSettings {
    fn default() -> Self {
        SupervisedSettings {
            l2: 1e-4,
            learning_rate: 1e-3,
            full_batch: LogisticConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSettings {
    /// Negatives per validation and test candidate set.
    pub n_neg: usize,
    /// Shortlist size N passed to the re-ranker.
    pub shortlist: usize,
    /// Master seeds averaged by the main table.
    pub seeds: Vec<u64>,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings {
            n_neg: 99,
            shortlist: 20,
            seeds: vec![42, 43, 44],
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    /// Persona, community, candidates and confidence sections.
    #[default]
    Persona,
    /// Candidate details only.
    Plain,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// OpenAI-style chat-completion endpoint.
    ChatCompletion,
    /// Mock: the held-out positive first, the rest in reward order.
    Oracle,
    /// Mock: reward order reversed.
    Adversary,
    /// Serves cached responses only; a miss is a provider error.
    Replay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub name: String,
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default)]
    pub model: String,
    /// Environment variable holding the bearer token.
    #[serde(default)]
    pub auth_env: Option<String>,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    /// Response cache directory; defaults to `<output_dir>/llm_cache`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn default_timeout() -> u64 {
    60
}

fn default_retries() -> u32 {
    2
}

fn default_concurrency() -> usize {
    4
}

impl ProviderConfig {
    pub fn mock(name: &str, kind: ProviderKind) -> Self {
        ProviderConfig {
            name: name.into(),
            kind,
            endpoint: None,
            model: name.into(),
            auth_env: None,
            temperature: 0.0,
            timeout_secs: default_timeout(),
            retries: default_retries(),
            concurrency: default_concurrency(),
            cache_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankSettings {
    pub prompt_mode: PromptMode,
    pub alpha_grid: Vec<f64>,
    /// Apply fusion at test time only if it does not hurt validation NDCG@10.
    pub boost_only_gate: bool,
    pub providers: Vec<ProviderConfig>,
}

impl Default for RerankSettings {
    fn default() -> Self {
        RerankSettings {
            prompt_mode: PromptMode::Persona,
            alpha_grid: (0..=10).map(|k| k as f64 / 10.0).collect(),
            boost_only_gate: false,
            providers: vec![
                ProviderConfig::mock("oracle", ProviderKind::Oracle),
                ProviderConfig::mock("adversary", ProviderKind::Adversary),
            ],
        }
    }
}

impl ExperimentConfig {
    /// Defaults around a dataset source.
    pub fn new(dataset: DatasetSource) -> Self {
        ExperimentConfig {
            seed: default_seed(),
            output_dir: default_output(),
            jobs: 0,
            dataset,
            filter: FilterConfig::default(),
            graph: GraphSettings::default(),
            retrieval: RetrievalSettings::default(),
            features: FeatureSettings::default(),
            train: TrainConfig::default(),
            supervised: SupervisedSettings::default(),
            evaluation: EvaluationSettings::default(),
            rerank: RerankSettings::default(),
        }
    }

    /// Parses TOML; relative paths resolve against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.dataset.resolve_paths(base);
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        for p in &mut cfg.rerank.providers {
            if let Some(dir) = &mut p.cache_dir {
                if dir.is_relative() {
                    *dir = base.join(&*dir);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.evaluation.n_neg == 0 || self.evaluation.shortlist == 0 {
            return bad("evaluation.n_neg and evaluation.shortlist must be at least 1".into());
        }
        if self.retrieval.community_size == 0 {
            return bad("retrieval.community_size must be at least 1".into());
        }
        if self.rerank.alpha_grid.is_empty() || self.rerank.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad("rerank.alpha_grid must be non-empty values in [0, 1]".into());
        }
        for p in &self.rerank.providers {
            if p.temperature != 0.0 {
                return bad(format!("provider {}: temperature must be 0", p.name));
            }
            if p.kind == ProviderKind::ChatCompletion && p.endpoint.is_none() {
                return bad(format!("provider {}: chat_completion needs an endpoint", p.name));
            }
            if p.concurrency == 0 {
                return bad(format!("provider {}: concurrency must be at least 1", p.name));
            }
        }
        if !(self.supervised.l2 >= 0.0) {
            return bad("supervised.l2 must be non-negative".into());
        }
        Ok(())
    }

    /// Canonical TOML rendering (what manifests embed).
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical rendering, leaving out the settings that
    /// cannot change results (`output_dir`, `jobs`).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        c.jobs = 0;
        sha256_hex(c.to_toml().as_bytes())
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        c.seed = seed;
        c
    }

    pub fn provider(&self, name: &str) -> Result<&ProviderConfig> {
        self.rerank
            .providers
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::Config(format!("no provider named {name:?}")))
    }
}

/// Annotated configuration with every default, for `config-reference`.
pub fn config_reference() -> String {
    let mut cfg = ExperimentConfig::new(DatasetSource::Movielens(crate::data::MovieLensSource {
        dir: PathBuf::from("data/ml-latest-small"),
    }));
    cfg.rerank.providers.push(ProviderConfig {
        name: "remote".into(),
        kind: ProviderKind::ChatCompletion,
        endpoint: Some("https://api.example.com/v1/chat/completions".into()),
        model: "model-id".into(),
        auth_env: Some("LLM_API_KEY".into()),
        ..ProviderConfig::mock("remote", ProviderKind::ChatCompletion)
    });
    let body = cfg.to_toml();
    format!(
        "# Experiment configuration reference. Every key below shows its default.\n\
         # Relative paths resolve against the directory of the config file.\n\
         # dataset.format is \"movielens\" (dir with ratings.csv, movies.csv, tags.csv)\n\
         # or \"columnar\" (log, user_column, item_column, signal_column,\n\
         # timestamp_column, timestamp_unit, delimiter, optional [dataset.items]).\n\
         # filter.positive is {{ kind = \"at_least\", threshold }} or {{ kind = \"equals\", value }}.\n\
         # filter.mode is \"one_pass\" or \"fixpoint\".\n\
         # train.architecture is {{ variant = \"mlp\", hidden }} or {{ variant = \"linear\" }};\n\
         # train.objective is \"listwise\" or \"pointwise\"; train.optimizer is\n\
         # {{ kind = \"adam\", beta1, beta2, epsilon }} or {{ kind = \"sgd\" }}.\n\
         # train.seed is overridden by the master seed.\n\
         # features.precision is \"f32\" or \"f64\".\n\
         # rerank.prompt_mode is \"persona\" or \"plain\"; provider kinds are\n\
         # chat_completion, oracle, adversary and replay.\n\n{body}"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults_and_resolves_paths() {
        let cfg = ExperimentConfig::from_toml(
            "[dataset]\nformat = \"movielens\"\ndir = \"ml\"\n",
            Path::new("/base"),
        )
        .unwrap();
        assert_eq!(cfg.train.max_epochs, 50);
        assert_eq!(cfg.evaluation.n_neg, 99);
        assert_eq!(cfg.rerank.alpha_grid.len(), 11);
        assert_eq!(cfg.output_dir, PathBuf::from("/base/runs"));
        match &cfg.dataset {
            DatasetSource::Movielens(m) => assert_eq!(m.dir, PathBuf::from("/base/ml")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reference_round_trips_and_hash_is_stable() {
        let text = config_reference();
        let cfg = ExperimentConfig::from_toml(&text, Path::new("/x")).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml(), Path::new("/x")).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_ne!(cfg.hash(), cfg.with_seed(7).hash());
        let mut moved = cfg.clone();
        moved.output_dir = PathBuf::from("/elsewhere");
        moved.jobs = 3;
        assert_eq!(cfg.hash(), moved.hash());
    }

    #[test]
    fn rejects_unknown_keys_and_nonzero_temperature() {
        assert!(ExperimentConfig::from_toml("bogus = 1\n[dataset]\nformat=\"movielens\"\ndir=\"x\"", Path::new(".")).is_err());
        let text = "[dataset]\nformat=\"movielens\"\ndir=\"x\"\n[[rerank.providers]]\nname=\"a\"\nkind=\"oracle\"\ntemperature=0.5\n";
        assert!(matches!(ExperimentConfig::from_toml(text, Path::new(".")), Err(Error::Config(_))));
    }
}

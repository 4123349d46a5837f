//! Run configuration read from a TOML file with one table per component.
//!
//! ```toml
//! [embedder]
//! dimension = 256
//!
//! [chain]
//! beta = 1.0
//! t_max = 64
//!
//! [paths]
//! context = "fixtures/context.jsonl"
//! ```
//!
//! Every field has a default, and unknown keys are rejected with their full
//! key path.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::AnalysisConfig;
use crate::chain::ChainConfig;
use crate::detect::SyntheticCorpusConfig;
use crate::embed::EmbedderConfig;
use crate::error::{CarolError, Result};
use crate::proposal::ProposalConfig;

pub const DEFAULT_QUERY: &str = "What is the capital of France?";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub context: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub query: String,
    pub embedder: EmbedderConfig,
    pub proposal: ProposalConfig,
    pub chain: ChainConfig,
    pub analysis: AnalysisConfig,
    pub synthetic: SyntheticCorpusConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            query: DEFAULT_QUERY.to_string(),
            embedder: EmbedderConfig::default(),
            proposal: ProposalConfig::default(),
            chain: ChainConfig::default(),
            analysis: AnalysisConfig::default(),
            synthetic: SyntheticCorpusConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| CarolError::Config {
            key: String::new(),
            message: e.message().to_string(),
        })?;
        serde_path_to_error::deserialize(de).map_err(|e| CarolError::Config {
            key: e.path().to_string(),
            message: e.inner().message().to_string(),
        })
    }

    /// Reads and validates a config file. Relative paths inside it resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CarolError::io(path, e))?;
        let mut cfg = RunConfig::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.paths.resolve_against(dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fills provider settings from the environment.
    pub fn apply_env(&mut self) {
        self.embedder.apply_env();
        self.proposal.apply_env();
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.chain.seed = seed;
        self.proposal.seed = seed;
        self.analysis.seed = seed;
        self.synthetic.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        if self.query.trim().is_empty() {
            return Err(CarolError::Config {
                key: "query".into(),
                message: "must not be empty".into(),
            });
        }
        self.embedder.validate()?;
        self.proposal.validate()?;
        self.chain.validate()?;
        self.analysis.validate()
    }

    /// The effective configuration, defaults included, as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

impl PathsConfig {
    fn resolve_against(&mut self, dir: &Path) {
        for p in [&mut self.context, &mut self.pool, &mut self.corpus, &mut self.out_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }
}

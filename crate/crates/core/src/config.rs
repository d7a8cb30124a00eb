//! Run configuration: a TOML file mirroring the config tree, merged with CLI
//! overrides. The resolved config is hashed into every run manifest so runs
//! are reproducible from their manifests.

use crate::gateway::ModelConfig;
use crate::matching::MatchRule;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("config {path} is not valid TOML: {source}")]
    Parse { path: String, source: toml::de::Error },
    #[error("{0}")]
    Invalid(String),
}

/// Which client backs a generation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    #[default]
    Oracle,
    Scripted,
    Http,
}

impl std::str::FromStr for ClientKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(ClientKind::Oracle),
            "scripted" => Ok(ClientKind::Scripted),
            "http" => Ok(ClientKind::Http),
            other => Err(format!("unknown client {other:?} (expected oracle, scripted, or http)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientConfig {
    #[serde(default)]
    pub kind: ClientKind,
    /// Oracle corruption rate for non-key values.
    #[serde(default)]
    pub corruption: f64,
    /// Transcript file for the scripted client.
    #[serde(default)]
    pub transcript: Option<String>,
}

impl Default for ClientConfig {
    fn default() -> Self {
        Self { kind: ClientKind::Oracle, corruption: 0.0, transcript: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationConfig {
    #[serde(default = "default_true")]
    pub tau_fuzzy_keys: bool,
    #[serde(default = "default_true")]
    pub dedup_keys: bool,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { tau_fuzzy_keys: true, dedup_keys: true }
    }
}

fn default_true() -> bool {
    true
}

/// Everything a run needs, resolvable before execution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub benchmark: Option<String>,
    #[serde(default)]
    pub out_dir: Option<String>,
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub cache_dir: Option<String>,
    #[serde(default = "default_true")]
    pub cache: bool,
    #[serde(default)]
    pub template_dir: Option<String>,
    #[serde(default)]
    pub model_family: Option<String>,
    #[serde(default)]
    pub client: ClientConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub match_rule: MatchRule,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
}

fn default_parallelism() -> usize {
    4
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            benchmark: None,
            out_dir: None,
            method: None,
            scenario: None,
            seed: 0,
            parallelism: default_parallelism(),
            cache_dir: None,
            cache: true,
            template_dir: None,
            model_family: None,
            client: ClientConfig::default(),
            model: ModelConfig::default(),
            match_rule: MatchRule::default(),
            evaluation: EvaluationConfig { tau_fuzzy_keys: true, dedup_keys: true },
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.display().to_string(), source })?;
        toml::from_str(&text)
            .map_err(|source| ConfigError::Parse { path: path.display().to_string(), source })
    }

    /// Hash of the resolved configuration; recorded in every run manifest.
    ///
    /// Location fields (benchmark path, output and cache directories) are
    /// masked out: they do not influence output content, and the benchmark
    /// itself is pinned separately by its file hash. Credential values are
    /// never part of it, only the environment-variable name.
    pub fn config_hash(&self) -> String {
        let mut masked = self.clone();
        masked.benchmark = None;
        masked.out_dir = None;
        masked.cache_dir = None;
        let canonical = serde_json::to_string(&masked).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        hex::encode(hasher.finalize())
    }
}

/// Hash of a file's bytes, used to pin the benchmark a run was made from.
pub fn file_hash(path: impl AsRef<Path>) -> Result<String, std::io::Error> {
    let bytes = std::fs::read(path.as_ref())?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex::encode(hasher.finalize()))
}

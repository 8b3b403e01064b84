//! Run configuration file.
//!
//! ```toml
//! [backend]
//! kind = "http"                 # or "mock"
//! endpoint = "https://api.example.com/v1/completions"
//! model = "codellama-7b-python"
//! api_key_env = "PVQA_API_KEY"  # the key itself never lives in the file
//!
//! [prompts]
//! dir = "prompts/default"
//!
//! [pipeline]
//! n_rephrasings = 3
//! m_samples = 3
//!
//! [provider]
//! kind = "fixture"              # or "remote"
//! fixtures_dir = "fixtures"
//!
//! [cache]
//! dir = ".pvqa-cache"
//! ```
//!
//! Relative paths resolve against the directory holding the file.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{CacheError, ResponseCache};
use crate::llm::{Gateway, HttpBackend, HttpBackendConfig, LlmError, MockBackend};
use crate::model::{ModelError, PipelineConfig};
use crate::par::Parallelism;
use crate::prompt::{load_bundle, DatasetProfile, PromptBundle, PromptError};
use crate::vision::{ApiError, FixtureProvider, RemoteVisionConfig, RemoteVisionProvider, VisionProvider};

pub const DEFAULT_API_KEY_ENV: &str = "PVQA_API_KEY";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Invalid(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("llm backend: {0}")]
    Llm(#[from] LlmError),
    #[error("vision provider: {0}")]
    Vision(#[from] ApiError),
    #[error("cache: {0}")]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendSection {
    pub kind: BackendKind,
    pub mock_script: Option<PathBuf>,
    pub api_key_env: Option<String>,
    #[serde(flatten)]
    pub http: HttpBackendConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptsSection {
    pub dir: PathBuf,
    pub profile: DatasetProfile,
}

impl Default for PromptsSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("prompts/default"), profile: DatasetProfile::Gqa }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    #[default]
    Fixture,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ProviderSection {
    pub kind: ProviderKind,
    pub fixtures_dir: Option<PathBuf>,
    #[serde(flatten)]
    pub remote: RemoteVisionConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct CacheSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub parallelism: Parallelism,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub backend: BackendSection,
    pub prompts: PromptsSection,
    pub pipeline: PipelineConfig,
    pub provider: ProviderSection,
    pub cache: CacheSection,
    pub run: RunSection,
    /// Directory relative paths resolve against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut config = Self::from_toml(&text)
            .map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.pipeline.validate()?;
        if self.backend.kind == BackendKind::Http && self.backend.http.endpoint.trim().is_empty() {
            return Err(ConfigError::Invalid("backend.endpoint is empty".into()));
        }
        if self.provider.kind == ProviderKind::Fixture && self.provider.fixtures_dir.is_none() {
            return Err(ConfigError::Invalid("provider.fixtures_dir is required for the fixture provider".into()));
        }
        Ok(())
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// Builds the LLM gateway. `mock_script` overrides the configured backend.
    pub fn gateway(&self, mock_script: Option<&Path>) -> Result<Gateway, ConfigError> {
        let gateway = match (mock_script, self.backend.kind) {
            (Some(script), _) => Gateway::new(MockBackend::from_file(script)?),
            (None, BackendKind::Mock) => {
                let script = self
                    .backend
                    .mock_script
                    .as_ref()
                    .ok_or_else(|| ConfigError::Invalid("backend.mock_script is required for the mock backend".into()))?;
                Gateway::new(MockBackend::from_file(&self.resolve(script))?)
            }
            (None, BackendKind::Http) => {
                let var = self.backend.api_key_env.clone().unwrap_or_else(|| DEFAULT_API_KEY_ENV.to_string());
                let key = std::env::var(&var).ok().filter(|k| !k.is_empty());
                if key.is_none() && self.backend.api_key_env.is_some() {
                    return Err(ConfigError::MissingApiKey(var));
                }
                Gateway::new(HttpBackend::new(self.backend.http.clone(), key)?)
            }
        };
        Ok(match &self.cache.dir {
            Some(dir) => gateway.with_cache(ResponseCache::open(self.resolve(dir))?),
            None => gateway,
        })
    }

    pub fn bundle(&self, profile: DatasetProfile) -> Result<PromptBundle, ConfigError> {
        Ok(load_bundle(&self.resolve(&self.prompts.dir), profile)?)
    }

    /// Builds the vision provider; the remote provider answers `query`
    /// through `gateway`.
    pub fn provider(&self, gateway: Arc<Gateway>) -> Result<Box<dyn VisionProvider>, ConfigError> {
        match self.provider.kind {
            ProviderKind::Fixture => {
                let dir = self.provider.fixtures_dir.as_ref().expect("validated");
                Ok(Box::new(FixtureProvider::load_dir(&self.resolve(dir))?))
            }
            ProviderKind::Remote => Ok(Box::new(RemoteVisionProvider::new(self.provider.remote.clone(), gateway)?)),
        }
    }
}

//! Service configuration: a TOML file plus environment overrides.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use pragmachat_core::gateway::{
    Backend, BackendEmbedder, Embedder, GenerationParams, MockBackend, ModelSpec, OllamaBackend, BACKEND_URL_ENV,
    DEFAULT_TIMEOUT_SECS,
};
use pragmachat_core::knowledge::DATA_DIR_ENV;
use pragmachat_core::metrics::EvalOptions;
use pragmachat_core::speechact::{Classifier, RemoteClassifier, RuleClassifier, SpeechActCategory};
use pragmachat_core::SynonymLexicon;
use serde::{Deserialize, Serialize};

/// Env var naming the config file.
pub const CONFIG_ENV: &str = "PRAGMACHAT_CONFIG";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot load synonym lexicon: {0}")]
    Synonyms(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Ollama,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ClassifierConfig {
    Rules,
    Remote {
        endpoint: String,
        #[serde(default)]
        aliases: HashMap<String, SpeechActCategory>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AppConfig {
    pub bind: String,
    pub data_dir: PathBuf,
    pub backend: BackendKind,
    pub backend_url: String,
    pub timeout_secs: u64,
    /// Model used for embedding-based metrics.
    pub embedding_model: Option<String>,
    /// Ask the embedding model for per-token vectors. Off by default for
    /// Ollama, where every token would be a separate request.
    pub token_embeddings: Option<bool>,
    pub classifier: ClassifierConfig,
    /// Decoding options for interactive chat.
    pub params: GenerationParams,
    pub knowledge_budget: usize,
    pub synonyms_path: Option<PathBuf>,
    /// Allowed CORS origins; `*` allows any.
    pub cors_origins: Vec<String>,
}

impl Default for AppConfig {
    fn default() -> Self {
        AppConfig {
            bind: "127.0.0.1:8080".into(),
            data_dir: PathBuf::from("data"),
            backend: BackendKind::Ollama,
            backend_url: "http://localhost:11434".into(),
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            embedding_model: None,
            token_embeddings: None,
            classifier: ClassifierConfig::Rules,
            params: GenerationParams::default(),
            knowledge_budget: pragmachat_core::dialogue::DEFAULT_KNOWLEDGE_BUDGET,
            synonyms_path: None,
            cors_origins: vec!["*".into()],
        }
    }
}

impl AppConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Reads `path`, else the file named by `PRAGMACHAT_CONFIG`, else the
    /// defaults; then applies `PRAGMACHAT_DATA` and `PRAGMACHAT_BACKEND_URL`.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let path = path
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let mut config = match path {
            Some(path) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|source| ConfigError::Read { path, source })?;
                Self::parse(&text)?
            }
            None => AppConfig::default(),
        };
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            config.data_dir = dir.into();
        }
        if let Ok(url) = std::env::var(BACKEND_URL_ENV) {
            config.backend_url = url;
        }
        Ok(config)
    }

    pub fn embedding_model(&self) -> String {
        self.embedding_model.clone().unwrap_or_else(|| match self.backend {
            BackendKind::Mock => "mock-embed".into(),
            BackendKind::Ollama => "nomic-embed-text".into(),
        })
    }

    pub fn build_backend(&self) -> Arc<dyn Backend> {
        match self.backend {
            BackendKind::Mock => Arc::new(MockBackend::new()),
            BackendKind::Ollama => Arc::new(OllamaBackend::with_timeout(
                &self.backend_url,
                Duration::from_secs(self.timeout_secs),
            )),
        }
    }

    pub fn build_embedder(&self, backend: Arc<dyn Backend>) -> Arc<dyn Embedder> {
        self.build_embedder_for(backend, &self.embedding_model())
    }

    pub fn build_embedder_for(&self, backend: Arc<dyn Backend>, model: &str) -> Arc<dyn Embedder> {
        let embedder = BackendEmbedder::new(backend, ModelSpec::named(model));
        let tokens = self
            .token_embeddings
            .unwrap_or(self.backend == BackendKind::Mock);
        Arc::new(if tokens {
            embedder
        } else {
            embedder.whole_text_only()
        })
    }

    pub fn build_classifier(&self) -> Arc<dyn Classifier> {
        match &self.classifier {
            ClassifierConfig::Rules => Arc::new(RuleClassifier::default()),
            ClassifierConfig::Remote { endpoint, aliases } => {
                Arc::new(RemoteClassifier::new(endpoint).with_aliases(aliases.clone()))
            }
        }
    }

    pub fn eval_options(&self) -> Result<EvalOptions, ConfigError> {
        let synonyms = match &self.synonyms_path {
            Some(path) => {
                SynonymLexicon::load(path).map_err(|e| ConfigError::Synonyms(e.to_string()))?
            }
            None => SynonymLexicon::default(),
        };
        Ok(EvalOptions {
            synonyms,
            ..EvalOptions::default()
        })
    }
}

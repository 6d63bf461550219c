//! Client abstraction over the text-generation backend.
//!
//! Everything downstream talks to a [`Backend`]; [`OllamaBackend`] speaks the
//! Ollama HTTP/JSON API and [`MockBackend`] is a deterministic offline stand-in.

mod mock;
mod ollama;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{MockBackend, PromptLogEntry, MOCK_EMBED_DIM};
pub use ollama::{OllamaBackend, DEFAULT_TIMEOUT_SECS};

/// Env var holding the backend base URL.
pub const BACKEND_URL_ENV: &str = "PRAGMACHAT_BACKEND_URL";

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
    #[error("unknown model: {0}")]
    UnknownModel(String),
    #[error("backend error (status {status}): {body}")]
    Backend { status: u16, body: String },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("could not decode backend response: {0}")]
    Decode(String),
}

/// A model as reported by the backend, e.g. `llama2:13b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    #[serde(default = "default_true")]
    pub available: bool,
}

fn default_true() -> bool {
    true
}

impl ModelSpec {
    pub fn named(name: impl Into<String>) -> Self {
        ModelSpec {
            name: name.into(),
            available: true,
        }
    }
}

impl std::fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.name)
    }
}

/// Decoding options sent with every generate call.
///
/// The defaults are the fixed values the experiments were run with; together
/// with the seed they make a run repeatable on the same backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: u32,
    /// Maximum number of output tokens.
    pub num_predict: u32,
    pub seed: i64,
    /// Context window in tokens.
    pub num_ctx: u32,
    /// `-1` means the whole context.
    pub repeat_last_n: i32,
    pub repeat_penalty: f64,
    pub mirostat_tau: f64,
    pub stream: bool,
    pub raw: bool,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            temperature: 1.0,
            top_p: 1.0,
            top_k: 1,
            num_predict: 300,
            seed: 42,
            num_ctx: 4096,
            repeat_last_n: -1,
            repeat_penalty: 1.5,
            mirostat_tau: 1.0,
            stream: false,
            raw: false,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), GatewayError> {
        let bad = |what: &str| Err(GatewayError::InvalidRequest(what.to_string()));
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must be in (0, 1]");
        }
        if self.top_k < 1 {
            return bad("top_k must be >= 1");
        }
        if self.num_predict < 1 {
            return bad("num_predict must be >= 1");
        }
        if self.num_ctx < 1 {
            return bad("num_ctx must be >= 1");
        }
        if self.repeat_last_n < -1 {
            return bad("repeat_last_n must be >= -1");
        }
        if self.repeat_penalty.is_nan() || self.repeat_penalty <= 0.0 {
            return bad("repeat_penalty must be > 0");
        }
        if self.mirostat_tau.is_nan() || self.mirostat_tau < 0.0 {
            return bad("mirostat_tau must be >= 0");
        }
        Ok(())
    }

    /// The `options` object of an Ollama generate request.
    pub fn options_json(&self) -> serde_json::Value {
        serde_json::json!({
            "temperature": self.temperature,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "num_predict": self.num_predict,
            "seed": self.seed,
            "num_ctx": self.num_ctx,
            "repeat_last_n": self.repeat_last_n,
            "repeat_penalty": self.repeat_penalty,
            "mirostat_tau": self.mirostat_tau,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResult {
    /// Completion text with surrounding whitespace stripped.
    pub text: String,
    /// Wall-clock seconds for one generate round trip.
    pub response_time_s: f64,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        EmbeddingVector { values }
    }

    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

/// A generation/embedding backend. Implementations must be safe to share
/// between threads; every call is an independent request.
pub trait Backend: Send + Sync {
    fn generate(
        &self,
        model: &ModelSpec,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<GenerationResult, GatewayError>;

    fn embed(&self, model: &ModelSpec, text: &str) -> Result<EmbeddingVector, GatewayError>;

    fn list_models(&self) -> Result<Vec<ModelSpec>, GatewayError>;
}

macro_rules! forward_backend {
    ($($ty:ty),*) => {$(
        impl<B: Backend + ?Sized> Backend for $ty {
            fn generate(
                &self,
                model: &ModelSpec,
                prompt: &str,
                params: &GenerationParams,
            ) -> Result<GenerationResult, GatewayError> {
                (**self).generate(model, prompt, params)
            }

            fn embed(&self, model: &ModelSpec, text: &str) -> Result<EmbeddingVector, GatewayError> {
                (**self).embed(model, text)
            }

            fn list_models(&self) -> Result<Vec<ModelSpec>, GatewayError> {
                (**self).list_models()
            }
        }
    )*};
}

forward_backend!(std::sync::Arc<B>, &B, Box<B>);

/// Something that turns text into a vector. The metrics only need this much
/// of a backend.
pub trait Embedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError>;

    /// Whether embedding single tokens is meaningful for this provider.
    /// Providers that only embed whole texts make BERT-style scoring fall
    /// back to one vector per side.
    fn embeds_tokens(&self) -> bool {
        true
    }
}

/// Binds a backend to one embedding model.
pub struct BackendEmbedder<B> {
    backend: B,
    model: ModelSpec,
    token_level: bool,
}

impl<B: Backend> BackendEmbedder<B> {
    pub fn new(backend: B, model: ModelSpec) -> Self {
        BackendEmbedder {
            backend,
            model,
            token_level: true,
        }
    }

    /// Declare that this model should only be asked for whole-text embeddings.
    pub fn whole_text_only(mut self) -> Self {
        self.token_level = false;
        self
    }
}

impl<B: Backend> Embedder for BackendEmbedder<B> {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        self.backend.embed(&self.model, text)
    }

    fn embeds_tokens(&self) -> bool {
        self.token_level
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_match_experiment_settings() {
        let p = GenerationParams::default();
        assert_eq!(p.temperature, 1.0);
        assert_eq!(p.top_p, 1.0);
        assert_eq!(p.top_k, 1);
        assert_eq!(p.num_predict, 300);
        assert_eq!(p.seed, 42);
        assert_eq!(p.num_ctx, 4096);
        assert_eq!(p.repeat_last_n, -1);
        assert_eq!(p.repeat_penalty, 1.5);
        assert_eq!(p.mirostat_tau, 1.0);
        assert!(!p.stream);
        assert!(!p.raw);
        p.validate().unwrap();
    }

    #[test]
    fn options_object_carries_every_decoding_knob() {
        let opts = GenerationParams::default().options_json();
        let obj = opts.as_object().unwrap();
        assert_eq!(obj.len(), 9);
        assert_eq!(obj["seed"], 42);
        assert_eq!(obj["repeat_last_n"], -1);
        assert_eq!(obj["repeat_penalty"], 1.5);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let p = GenerationParams {
            top_p: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        let p = GenerationParams {
            repeat_penalty: 0.0,
            ..Default::default()
        };
        assert!(p.validate().is_err());
    }
}

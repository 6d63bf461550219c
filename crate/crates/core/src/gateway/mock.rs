use std::collections::HashSet;
use std::sync::Mutex;

use super::{
    Backend, EmbeddingVector, GatewayError, GenerationParams, GenerationResult, ModelSpec,
};
use crate::hash::{sha256, sha256_hex};
use crate::metrics::tokenize;

/// Default dimension of the mock's hashed one-hot embeddings.
pub const MOCK_EMBED_DIM: usize = 256;

const QUERY_OPEN: &str = "Respond to the user's query: \"";
const QUERY_CLOSE: &str = "\" while considering";

/// One prompt the mock has seen.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptLogEntry {
    pub model: String,
    pub prompt: String,
}

/// Deterministic offline backend.
///
/// `generate` answers `MOCK(<model>|<8 hex of sha256(prompt)>): <query>`, where
/// the query is recovered from the instruction prompt (or the last non-empty
/// prompt line otherwise). Reported response time is simulated from the
/// prompt length so repeated runs serialize byte-identically.
///
/// `embed` tokenizes, hashes every token into one of `dim` buckets and
/// averages the one-hot vectors.
#[derive(Debug)]
pub struct MockBackend {
    models: Vec<String>,
    failing: HashSet<String>,
    dim: usize,
    down: bool,
    log: Mutex<Vec<PromptLogEntry>>,
}

impl Default for MockBackend {
    fn default() -> Self {
        MockBackend::new()
    }
}

impl MockBackend {
    pub fn new() -> Self {
        MockBackend {
            models: vec!["mock".to_string(), "mock-embed".to_string()],
            failing: HashSet::new(),
            dim: MOCK_EMBED_DIM,
            down: false,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Register an extra generation model.
    pub fn with_model(mut self, name: impl Into<String>) -> Self {
        let name = name.into();
        if !self.models.contains(&name) {
            self.models.push(name);
        }
        self
    }

    /// Make every generate call for `name` fail with a backend error.
    pub fn with_failing_model(mut self, name: impl Into<String>) -> Self {
        let name = name.into();
        if !self.models.contains(&name) {
            self.models.push(name.clone());
        }
        self.failing.insert(name);
        self
    }

    pub fn with_embedding_dim(mut self, dim: usize) -> Self {
        assert!(dim >= 1, "embedding dimension must be >= 1");
        self.dim = dim;
        self
    }

    /// Simulate a backend that cannot be reached.
    pub fn unreachable() -> Self {
        MockBackend {
            down: true,
            ..MockBackend::new()
        }
    }

    pub fn embedding_dim(&self) -> usize {
        self.dim
    }

    /// Bucket a token hashes to.
    pub fn bucket(&self, token: &str) -> usize {
        let h = sha256(token.as_bytes());
        let mut word = [0u8; 8];
        word.copy_from_slice(&h[..8]);
        (u64::from_be_bytes(word) % self.dim as u64) as usize
    }

    /// Prompts received so far, in order.
    pub fn prompts(&self) -> Vec<PromptLogEntry> {
        self.log.lock().expect("prompt log poisoned").clone()
    }

    pub fn clear_prompts(&self) {
        self.log.lock().expect("prompt log poisoned").clear();
    }

    fn check(&self, model: &ModelSpec) -> Result<(), GatewayError> {
        if self.down {
            return Err(GatewayError::Unreachable("mock backend is down".into()));
        }
        if !self.models.contains(&model.name) {
            return Err(GatewayError::UnknownModel(model.name.clone()));
        }
        Ok(())
    }
}

/// The user query inside an instruction prompt, or the last non-empty line.
fn echoed_query(prompt: &str) -> &str {
    if let Some(start) = prompt.rfind(QUERY_OPEN) {
        let rest = &prompt[start + QUERY_OPEN.len()..];
        if let Some(end) = rest.rfind(QUERY_CLOSE) {
            return &rest[..end];
        }
    }
    prompt
        .lines()
        .rev()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
}

impl Backend for MockBackend {
    fn generate(
        &self,
        model: &ModelSpec,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<GenerationResult, GatewayError> {
        self.check(model)?;
        if prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        params.validate()?;
        self.log
            .lock()
            .expect("prompt log poisoned")
            .push(PromptLogEntry {
                model: model.name.clone(),
                prompt: prompt.to_string(),
            });
        if self.failing.contains(&model.name) {
            return Err(GatewayError::Backend {
                status: 500,
                body: format!("mock failure for {}", model.name),
            });
        }
        let digest = sha256_hex(prompt.as_bytes());
        let text = format!(
            "MOCK({}|{}): {}",
            model.name,
            &digest[..8],
            echoed_query(prompt)
        );
        Ok(GenerationResult {
            text: text.trim().to_string(),
            response_time_s: prompt.len() as f64 / 1000.0,
            model: model.clone(),
        })
    }

    fn embed(&self, model: &ModelSpec, text: &str) -> Result<EmbeddingVector, GatewayError> {
        self.check(model)?;
        if text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty text".into()));
        }
        let tokens = tokenize(text);
        let mut values = vec![0.0; self.dim];
        if tokens.is_empty() {
            return Ok(EmbeddingVector::new(values));
        }
        let share = 1.0 / tokens.len() as f64;
        for token in tokens.iter() {
            values[self.bucket(token)] += share;
        }
        Ok(EmbeddingVector::new(values))
    }

    fn list_models(&self) -> Result<Vec<ModelSpec>, GatewayError> {
        if self.down {
            return Err(GatewayError::Unreachable("mock backend is down".into()));
        }
        Ok(self.models.iter().map(ModelSpec::named).collect())
    }
}

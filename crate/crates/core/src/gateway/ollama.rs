use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{
    Backend, EmbeddingVector, GatewayError, GenerationParams, GenerationResult, ModelSpec,
};

/// Long enough for the slowest single responses observed on consumer GPUs.
pub const DEFAULT_TIMEOUT_SECS: u64 = 600;

/// Ollama HTTP/JSON client (`/api/generate`, `/api/embeddings`, `/api/tags`).
#[derive(Debug, Clone)]
pub struct OllamaBackend {
    base_url: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
struct GenerateReply {
    #[serde(default)]
    response: String,
}

#[derive(Deserialize)]
struct EmbeddingReply {
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct TagsReply {
    #[serde(default)]
    models: Vec<TagEntry>,
}

#[derive(Deserialize)]
struct TagEntry {
    name: String,
}

impl OllamaBackend {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self::with_timeout(base_url, Duration::from_secs(DEFAULT_TIMEOUT_SECS))
    }

    pub fn with_timeout(base_url: impl Into<String>, timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        OllamaBackend {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    fn url(&self, path: &str) -> String {
        format!("{}{}", self.base_url, path)
    }

    fn post(&self, path: &str, body: serde_json::Value, model: &str) -> Result<String, GatewayError> {
        let resp = self
            .agent
            .post(self.url(path))
            .send_json(&body)
            .map_err(transport_error)?;
        read_reply(resp, Some(model))
    }
}

fn transport_error(err: ureq::Error) -> GatewayError {
    GatewayError::Unreachable(err.to_string())
}

fn read_reply(
    mut resp: ureq::http::Response<ureq::Body>,
    model: Option<&str>,
) -> Result<String, GatewayError> {
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .read_to_string()
        .map_err(transport_error)?;
    if (200..300).contains(&status) {
        return Ok(body);
    }
    // Ollama answers 404 {"error":"model 'x' not found"} for missing models.
    if let Some(model) = model {
        if status == 404 || (body.contains("not found") && body.contains(model)) {
            return Err(GatewayError::UnknownModel(model.to_string()));
        }
    }
    Err(GatewayError::Backend { status, body })
}

impl Backend for OllamaBackend {
    fn generate(
        &self,
        model: &ModelSpec,
        prompt: &str,
        params: &GenerationParams,
    ) -> Result<GenerationResult, GatewayError> {
        if prompt.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty prompt".into()));
        }
        params.validate()?;
        let body = json!({
            "model": model.name,
            "prompt": prompt,
            "options": params.options_json(),
            "stream": params.stream,
            "raw": params.raw,
        });
        let started = Instant::now();
        let reply = self.post("/api/generate", body, &model.name)?;
        let elapsed = started.elapsed().as_secs_f64();
        let parsed: GenerateReply =
            serde_json::from_str(&reply).map_err(|e| GatewayError::Decode(e.to_string()))?;
        Ok(GenerationResult {
            text: parsed.response.trim().to_string(),
            response_time_s: elapsed,
            model: model.clone(),
        })
    }

    fn embed(&self, model: &ModelSpec, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if text.trim().is_empty() {
            return Err(GatewayError::InvalidRequest("empty text".into()));
        }
        let reply = self.post(
            "/api/embeddings",
            json!({ "model": model.name, "prompt": text }),
            &model.name,
        )?;
        let parsed: EmbeddingReply =
            serde_json::from_str(&reply).map_err(|e| GatewayError::Decode(e.to_string()))?;
        if parsed.embedding.is_empty() {
            return Err(GatewayError::Decode("empty embedding".into()));
        }
        Ok(EmbeddingVector::new(parsed.embedding))
    }

    fn list_models(&self) -> Result<Vec<ModelSpec>, GatewayError> {
        let resp = self
            .agent
            .get(self.url("/api/tags"))
            .call()
            .map_err(transport_error)?;
        let reply = read_reply(resp, None)?;
        let parsed: TagsReply =
            serde_json::from_str(&reply).map_err(|e| GatewayError::Decode(e.to_string()))?;
        Ok(parsed.models.into_iter().map(|t| ModelSpec::named(t.name)).collect())
    }
}

use std::collections::HashMap;
use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{require_text, Classifier, SpeechActCategory, SpeechActError, SpeechActLabel};
use crate::gateway::GatewayError;

/// Client for a hosted text-classification endpoint
/// (`POST {"inputs": ...}` → `[{"label", "score"}]`).
///
/// The remote label inventory is unknown ahead of time, so labels go through
/// an alias map first and are otherwise parsed as a category name.
#[derive(Debug, Clone)]
pub struct RemoteClassifier {
    endpoint: String,
    aliases: HashMap<String, SpeechActCategory>,
    agent: ureq::Agent,
}

#[derive(Debug, Deserialize)]
struct Scored {
    label: String,
    score: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Reply {
    Flat(Vec<Scored>),
    Nested(Vec<Vec<Scored>>),
    Single(Scored),
}

impl RemoteClassifier {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteClassifier {
            endpoint: endpoint.into(),
            aliases: HashMap::new(),
            agent,
        }
    }

    pub fn with_aliases(mut self, aliases: HashMap<String, SpeechActCategory>) -> Self {
        self.aliases = aliases
            .into_iter()
            .map(|(k, v)| (k.to_lowercase(), v))
            .collect();
        self
    }

    pub fn map_label(&self, label: &str) -> Result<SpeechActCategory, SpeechActError> {
        if let Some(c) = self.aliases.get(&label.trim().to_lowercase()) {
            return Ok(*c);
        }
        label.parse()
    }
}

impl Classifier for RemoteClassifier {
    fn classify(&self, utterance: &str) -> Result<SpeechActLabel, SpeechActError> {
        let text = require_text(utterance)?;
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(json!({ "inputs": text }))
            .map_err(|e| GatewayError::Unreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::Unreachable(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Backend { status, body }.into());
        }
        let reply: Reply =
            serde_json::from_str(&body).map_err(|e| GatewayError::Decode(e.to_string()))?;
        let candidates = match reply {
            Reply::Flat(v) => v,
            Reply::Nested(v) => v.into_iter().flatten().collect(),
            Reply::Single(s) => vec![s],
        };
        let top = candidates
            .into_iter()
            .max_by(|a, b| {
                a.score
                    .unwrap_or(1.0)
                    .total_cmp(&b.score.unwrap_or(1.0))
            })
            .ok_or_else(|| GatewayError::Decode("no labels in classifier reply".into()))?;
        let category = self.map_label(&top.label)?;
        Ok(SpeechActLabel {
            category,
            confidence: top.score.unwrap_or(1.0).clamp(0.0, 1.0),
        })
    }
}

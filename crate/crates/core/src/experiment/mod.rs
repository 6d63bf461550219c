//! Two-arm (without/with speech act) experiments and their 1/0/S/F analysis.

mod compare;
mod report;
mod run;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::gateway::{GenerationParams, ModelSpec};
use crate::knowledge::KnowledgeError;
use crate::metrics::MetricReport;

pub use compare::{compare, compare_run, Cell, Comparison, ComparisonRow, ComparisonTable};
pub use report::{emit_comparison, emit_results, load_fixture, OutputFormat, CSV_HEADER};
pub use run::Runner;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("arms do not cover the same keys: {0}")]
    KeyMismatch(String),
    #[error("malformed results csv: {0}")]
    MalformedCsv(String),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which prompt variant a row was generated with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    WithoutForce,
    WithForce,
}

impl Arm {
    pub const ALL: [Arm; 2] = [Arm::WithoutForce, Arm::WithForce];

    pub fn as_str(self) -> &'static str {
        match self {
            Arm::WithoutForce => "without_force",
            Arm::WithForce => "with_force",
        }
    }

    pub fn includes_force(self) -> bool {
        self == Arm::WithForce
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "without_force" => Ok(Arm::WithoutForce),
            "with_force" => Ok(Arm::WithForce),
            other => Err(ExperimentError::MalformedCsv(format!("unknown arm {other:?}"))),
        }
    }
}

const ORDINALS: [&str; 10] = [
    "First", "Second", "Third", "Fourth", "Fifth", "Sixth", "Seventh", "Eighth", "Ninth", "Tenth",
];

/// 1-based position of a query within its conversation. Shown as
/// "First", "Second", ... and as the bare number past ten.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Turn(pub u32);

impl fmt::Display for Turn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match ORDINALS.get((self.0 as usize).wrapping_sub(1)) {
            Some(name) => f.write_str(name),
            None => write!(f, "{}", self.0),
        }
    }
}

impl FromStr for Turn {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some(i) = ORDINALS.iter().position(|o| o.eq_ignore_ascii_case(s)) {
            return Ok(Turn(i as u32 + 1));
        }
        match s.parse::<u32>() {
            Ok(n) if n > 0 => Ok(Turn(n)),
            _ => Err(ExperimentError::MalformedCsv(format!("bad turn {s:?}"))),
        }
    }
}

/// One document and the queries issued against it, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentQueries {
    pub doc_id: String,
    pub queries: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub documents: Vec<DocumentQueries>,
    #[serde(deserialize_with = "models_from_names_or_specs")]
    pub models: Vec<ModelSpec>,
    #[serde(default = "all_arms")]
    pub arms: Vec<Arm>,
    #[serde(default)]
    pub params: GenerationParams,
    #[serde(default = "default_rounding")]
    pub rounding: usize,
    #[serde(default)]
    pub tie_epsilon: f64,
    /// Model used for embedding-based metrics; the backend's default
    /// embedding model when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding_model: Option<String>,
}

fn all_arms() -> Vec<Arm> {
    Arm::ALL.to_vec()
}

fn default_rounding() -> usize {
    2
}

fn models_from_names_or_specs<'de, D>(de: D) -> Result<Vec<ModelSpec>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Name(String),
        Spec(ModelSpec),
    }
    Ok(Vec::<Entry>::deserialize(de)?
        .into_iter()
        .map(|e| match e {
            Entry::Name(n) => ModelSpec::named(n),
            Entry::Spec(s) => s,
        })
        .collect())
}

impl ExperimentConfig {
    /// Parses JSON, or TOML when the text does not start with `{`.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let config: ExperimentConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let invalid = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.documents.is_empty() {
            return invalid("no documents".into());
        }
        for d in &self.documents {
            if d.queries.is_empty() || d.queries.iter().any(|q| q.trim().is_empty()) {
                return invalid(format!("document {} needs non-empty queries", d.doc_id));
            }
        }
        if self.models.is_empty() {
            return invalid("no models".into());
        }
        if self.arms.is_empty() {
            return invalid("no arms".into());
        }
        let mut arms = self.arms.clone();
        arms.sort();
        arms.dedup();
        if arms.len() != self.arms.len() {
            return invalid("duplicate arm".into());
        }
        if !(self.tie_epsilon >= 0.0 && self.tie_epsilon.is_finite()) {
            return invalid("tie_epsilon must be a finite value >= 0".into());
        }
        self.params
            .validate()
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))
    }
}

/// The table-row projection of a [`MetricReport`]: latency plus the ten
/// metric values, ROUGE reduced to its F1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowScores {
    pub response_time_s: f64,
    pub bert_p: f64,
    pub bert_r: f64,
    pub bert_f1: f64,
    pub qa_ref: f64,
    pub qa_cand: f64,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub meteor: f64,
    pub perplexity: f64,
}

impl RowScores {
    /// Metric values in [`crate::metrics::METRIC_NAMES`] order.
    pub fn values(&self) -> [f64; 10] {
        [
            self.bert_p,
            self.bert_r,
            self.bert_f1,
            self.qa_ref,
            self.qa_cand,
            self.rouge1,
            self.rouge2,
            self.rouge_l,
            self.meteor,
            self.perplexity,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite()) && self.response_time_s.is_finite()
    }
}

impl From<&MetricReport> for RowScores {
    fn from(r: &MetricReport) -> Self {
        RowScores {
            response_time_s: r.response_time_s,
            bert_p: r.bert.precision,
            bert_r: r.bert.recall,
            bert_f1: r.bert.f1,
            qa_ref: r.qa_ref,
            qa_cand: r.qa_cand,
            rouge1: r.rouge1.f1,
            rouge2: r.rouge2.f1,
            rouge_l: r.rouge_l.f1,
            meteor: r.meteor,
            perplexity: r.perplexity,
        }
    }
}

/// One results-table row. `scores` is `None` when generation or scoring failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub serial: u32,
    pub doc_id: String,
    pub model: String,
    pub turn: Turn,
    pub arm: Arm,
    pub scores: Option<RowScores>,
}

impl RunRecord {
    pub fn key(&self) -> (&str, &str, Turn) {
        (&self.doc_id, &self.model, self.turn)
    }
}

//! Speech-act (illocutionary force) labelling of user utterances.

mod remote;
mod rules;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayError;

pub use remote::RemoteClassifier;
pub use rules::{PatternKind, Rule, RuleClassifier, RuleTable};

#[derive(Debug, Error)]
pub enum SpeechActError {
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("classifier label {0:?} has no speech-act mapping")]
    UnmappedLabel(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Searle's five illocutionary categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeechActCategory {
    Assertive,
    Directive,
    Commissive,
    Expressive,
    Declaration,
}

impl SpeechActCategory {
    pub const ALL: [SpeechActCategory; 5] = [
        SpeechActCategory::Assertive,
        SpeechActCategory::Directive,
        SpeechActCategory::Commissive,
        SpeechActCategory::Expressive,
        SpeechActCategory::Declaration,
    ];

    /// Lowercase name, as interpolated into prompts.
    pub fn as_str(self) -> &'static str {
        match self {
            SpeechActCategory::Assertive => "assertive",
            SpeechActCategory::Directive => "directive",
            SpeechActCategory::Commissive => "commissive",
            SpeechActCategory::Expressive => "expressive",
            SpeechActCategory::Declaration => "declaration",
        }
    }
}

impl fmt::Display for SpeechActCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpeechActCategory {
    type Err = SpeechActError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_lowercase();
        SpeechActCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == lower)
            .ok_or_else(|| SpeechActError::UnmappedLabel(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeechActLabel {
    pub category: SpeechActCategory,
    /// 1.0 for rule-based labels.
    pub confidence: f64,
}

impl SpeechActLabel {
    pub fn certain(category: SpeechActCategory) -> Self {
        SpeechActLabel {
            category,
            confidence: 1.0,
        }
    }
}

pub trait Classifier: Send + Sync {
    fn classify(&self, utterance: &str) -> Result<SpeechActLabel, SpeechActError>;
}

impl<C: Classifier + ?Sized> Classifier for std::sync::Arc<C> {
    fn classify(&self, utterance: &str) -> Result<SpeechActLabel, SpeechActError> {
        (**self).classify(utterance)
    }
}

pub(crate) fn require_text(utterance: &str) -> Result<&str, SpeechActError> {
    let trimmed = utterance.trim();
    if trimmed.is_empty() {
        Err(SpeechActError::EmptyUtterance)
    } else {
        Ok(trimmed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_names_round_trip() {
        for c in SpeechActCategory::ALL {
            assert_eq!(c.as_str().parse::<SpeechActCategory>().unwrap(), c);
            assert_eq!(
                serde_json::to_string(&c).unwrap(),
                format!("\"{}\"", c.as_str())
            );
        }
        assert!("question".parse::<SpeechActCategory>().is_err());
    }
}

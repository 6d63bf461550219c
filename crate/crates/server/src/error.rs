use pragmachat_core::dialogue::DialogueError;
use pragmachat_core::experiment::ExperimentError;
use pragmachat_core::gateway::GatewayError;
use pragmachat_core::knowledge::KnowledgeError;
use pragmachat_core::speechact::SpeechActError;

/// Service-level failure, one variant per HTTP status it maps to.
#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("message must not be empty")]
    EmptyMessage,
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BackendUnavailable(String),
    #[error("{0}")]
    Internal(String),
}

impl From<GatewayError> for ServiceError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::UnknownModel(_) | GatewayError::InvalidRequest(_) => {
                ServiceError::BadRequest(e.to_string())
            }
            GatewayError::Unreachable(_) | GatewayError::Backend { .. } | GatewayError::Decode(_) => {
                ServiceError::BackendUnavailable(e.to_string())
            }
        }
    }
}

impl From<KnowledgeError> for ServiceError {
    fn from(e: KnowledgeError) -> Self {
        match e {
            KnowledgeError::UnknownDocument(_) => ServiceError::NotFound(e.to_string()),
            KnowledgeError::EmptyFile
            | KnowledgeError::PdfExtractionFailed(_)
            | KnowledgeError::UnsupportedFormat(_) => ServiceError::BadRequest(e.to_string()),
            KnowledgeError::Io(_) | KnowledgeError::Index(_) => ServiceError::Internal(e.to_string()),
        }
    }
}

impl From<SpeechActError> for ServiceError {
    fn from(e: SpeechActError) -> Self {
        match e {
            SpeechActError::EmptyUtterance => ServiceError::EmptyMessage,
            SpeechActError::Gateway(g) => g.into(),
            SpeechActError::UnmappedLabel(_) => ServiceError::BackendUnavailable(e.to_string()),
        }
    }
}

impl From<DialogueError> for ServiceError {
    fn from(e: DialogueError) -> Self {
        match e {
            DialogueError::EmptyInput("query") => ServiceError::EmptyMessage,
            DialogueError::Gateway(g) => g.into(),
            DialogueError::SpeechAct(s) => s.into(),
            DialogueError::Knowledge(k) => k.into(),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl From<ExperimentError> for ServiceError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Knowledge(k) => k.into(),
            ExperimentError::Io(_) => ServiceError::Internal(e.to_string()),
            other => ServiceError::BadRequest(other.to_string()),
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

impl From<serde_json::Error> for ServiceError {
    fn from(e: serde_json::Error) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

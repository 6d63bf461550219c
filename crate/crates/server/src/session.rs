//! Chat sessions: a conversation plus the metrics of each exchange.

use chrono::{DateTime, Utc};
use pragmachat_core::dialogue::{ChatTurn, Conversation, Role};
use pragmachat_core::experiment::RowScores;
use pragmachat_core::gateway::ModelSpec;
use pragmachat_core::metrics::MetricReport;
use pragmachat_core::speechact::{SpeechActCategory, SpeechActLabel};
use serde::{Deserialize, Serialize};

/// What was recorded alongside one user/assistant pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeMeta {
    pub include_illocutionary_force: bool,
    pub metrics: Option<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub conversation: Conversation,
    /// Toggle state used when a chat request does not set it.
    pub include_illocutionary_force: bool,
    pub created_at: DateTime<Utc>,
    /// One entry per user/assistant pair in `conversation.turns`.
    pub exchanges: Vec<ExchangeMeta>,
}

/// Session log entries, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        id: String,
        doc_id: String,
        model: ModelSpec,
        include_illocutionary_force: bool,
        created_at: DateTime<Utc>,
    },
    Exchange {
        user: ChatTurn,
        assistant: ChatTurn,
        #[serde(flatten)]
        meta: ExchangeMeta,
    },
}

impl Session {
    /// Rebuilds a session from its log.
    pub fn replay(events: Vec<SessionEvent>) -> Result<Session, String> {
        let mut events = events.into_iter();
        let mut session = match events.next() {
            Some(SessionEvent::Created {
                id,
                doc_id,
                model,
                include_illocutionary_force,
                created_at,
            }) => Session {
                conversation: Conversation::new(id.clone(), doc_id, model),
                id,
                include_illocutionary_force,
                created_at,
                exchanges: Vec::new(),
            },
            _ => return Err("log does not start with a created event".into()),
        };
        for event in events {
            match event {
                SessionEvent::Exchange { user, assistant, meta } => {
                    session.include_illocutionary_force = meta.include_illocutionary_force;
                    session
                        .conversation
                        .push_exchange(user, assistant)
                        .map_err(|e| e.to_string())?;
                    session.exchanges.push(meta);
                }
                SessionEvent::Created { .. } => return Err("duplicate created event".into()),
            }
        }
        Ok(session)
    }

    pub fn view(&self) -> SessionView {
        let mut turns = Vec::with_capacity(self.conversation.turns.len());
        for (i, t) in self.conversation.turns.iter().enumerate() {
            let meta = self.exchanges.get(i / 2);
            let is_user = t.role == Role::User;
            turns.push(TurnView {
                role: t.role,
                text: t.text.clone(),
                speech_act: t.speech_act,
                timestamp: t.timestamp,
                include_illocutionary_force: meta
                    .filter(|_| is_user)
                    .map(|m| m.include_illocutionary_force),
                metrics: meta.filter(|_| !is_user).and_then(|m| m.metrics),
                scores: meta
                    .filter(|_| !is_user)
                    .and_then(|m| m.metrics.as_ref())
                    .map(RowScores::from),
            });
        }
        SessionView {
            id: self.id.clone(),
            doc_id: self.conversation.doc_id.clone(),
            model: self.conversation.model.clone(),
            include_illocutionary_force: self.include_illocutionary_force,
            created_at: self.created_at,
            turns,
        }
    }
}

/// Transcript as returned by the API.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: String,
    pub doc_id: String,
    pub model: ModelSpec,
    pub include_illocutionary_force: bool,
    pub created_at: DateTime<Utc>,
    pub turns: Vec<TurnView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnView {
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_act: Option<SpeechActLabel>,
    pub timestamp: DateTime<Utc>,
    /// User turns: whether the label went into the prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_illocutionary_force: Option<bool>,
    /// Assistant turns: full metric detail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricReport>,
    /// Assistant turns: the ten table values plus latency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<RowScores>,
}

/// Response to one chat request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatReply {
    pub session_id: String,
    pub assistant_text: String,
    /// Present only when the label was part of the prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_act: Option<SpeechActCategory>,
    pub include_illocutionary_force: bool,
    pub response_time_s: f64,
    /// Ten metric values plus latency, `null` when scoring failed.
    pub metrics: Option<RowScores>,
    pub metrics_detail: Option<MetricReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics_error: Option<String>,
}

//! Conversations, the instruction prompt, and one agent exchange.

mod agent;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::gateway::{GatewayError, ModelSpec};
use crate::knowledge::KnowledgeError;
use crate::speechact::{SpeechActError, SpeechActLabel};

pub use agent::{Agent, Exchange, DEFAULT_KNOWLEDGE_BUDGET};

#[derive(Debug, thiserror::Error)]
pub enum DialogueError {
    #[error("include_illocutionary_force is set but no speech act label was supplied")]
    MissingForce,
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),
    #[error("conversation {conversation} is bound to document {expected}, got {got}")]
    DocumentMismatch {
        conversation: String,
        expected: String,
        got: String,
    },
    #[error("malformed conversation: {0}")]
    Malformed(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    SpeechAct(#[from] SpeechActError),
    #[error(transparent)]
    Knowledge(#[from] KnowledgeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
}

impl Role {
    fn indicator(self) -> &'static str {
        match self {
            Role::User => "User",
            Role::Assistant => "Assistant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatTurn {
    pub role: Role,
    pub text: String,
    /// Only ever set on user turns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speech_act: Option<SpeechActLabel>,
    pub timestamp: DateTime<Utc>,
}

impl ChatTurn {
    pub fn user(text: impl Into<String>, speech_act: Option<SpeechActLabel>) -> Self {
        ChatTurn {
            role: Role::User,
            text: text.into(),
            speech_act,
            timestamp: Utc::now(),
        }
    }

    pub fn assistant(text: impl Into<String>) -> Self {
        ChatTurn {
            role: Role::Assistant,
            text: text.into(),
            speech_act: None,
            timestamp: Utc::now(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conversation {
    pub id: String,
    pub doc_id: String,
    pub model: ModelSpec,
    pub turns: Vec<ChatTurn>,
}

impl Conversation {
    pub fn new(id: impl Into<String>, doc_id: impl Into<String>, model: ModelSpec) -> Self {
        Conversation {
            id: id.into(),
            doc_id: doc_id.into(),
            model,
            turns: Vec::new(),
        }
    }

    /// Checks the turn invariants: non-empty text, labels on user turns only,
    /// and roles alternating from a leading user turn.
    pub fn validate(&self) -> Result<(), DialogueError> {
        for (i, turn) in self.turns.iter().enumerate() {
            let expected = if i % 2 == 0 { Role::User } else { Role::Assistant };
            if turn.role != expected {
                return Err(DialogueError::Malformed(format!(
                    "turn {i} is {:?}, expected {expected:?}",
                    turn.role
                )));
            }
            if turn.text.trim().is_empty() {
                return Err(DialogueError::Malformed(format!("turn {i} is empty")));
            }
            if turn.role == Role::Assistant && turn.speech_act.is_some() {
                return Err(DialogueError::Malformed(format!(
                    "assistant turn {i} carries a speech act"
                )));
            }
        }
        Ok(())
    }

    /// Appends one user/assistant pair.
    pub fn push_exchange(&mut self, user: ChatTurn, assistant: ChatTurn) -> Result<(), DialogueError> {
        if !self.turns.len().is_multiple_of(2) {
            return Err(DialogueError::Malformed("conversation ends on a user turn".into()));
        }
        self.turns.push(user);
        self.turns.push(assistant);
        if let Err(e) = self.validate() {
            self.turns.truncate(self.turns.len() - 2);
            return Err(e);
        }
        Ok(())
    }
}

/// The four template parameters plus the toggle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInputs {
    pub user_input: String,
    pub context: String,
    pub knowledge_text: String,
    pub illocutionary_force: Option<String>,
    pub include_illocutionary_force: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstructionPrompt {
    pub text: String,
}

/// Renders prior turns as `User: ...` / `Assistant: ...` lines.
pub fn render_context(turns: &[ChatTurn]) -> String {
    turns
        .iter()
        .map(|t| format!("{}: {}", t.role.indicator(), t.text))
        .collect::<Vec<_>>()
        .join("\n")
}

/// The sentence appended when the speech act is included.
pub fn force_sentence(label: &str) -> String {
    format!(
        "Consider the user's communicative intent while responding, characterized by the speech acts: '{label}'."
    )
}

pub fn build_instruction(inputs: &PromptInputs) -> Result<InstructionPrompt, DialogueError> {
    if inputs.user_input.trim().is_empty() {
        return Err(DialogueError::EmptyInput("user_input"));
    }
    if inputs.knowledge_text.trim().is_empty() {
        return Err(DialogueError::EmptyInput("knowledge_text"));
    }
    // Whitespace is part of the template: four-space indents and the trailing
    // blanks after the knowledge line.
    let mut text = format!(
        "\n    Respond to the user's query: \"{}\" while considering the relevant context from previous conversations.\n    Please focus on providing a response based on the latest exchange, without repeating the entire conversation history.\n    If needed, use the context provided below for reference.\n\n    Relevant context: \"{}\"\n\n    Use only the information provided in this document to respond: '{}'.        \n    ",
        inputs.user_input, inputs.context, inputs.knowledge_text
    );
    if inputs.include_illocutionary_force {
        let force = inputs
            .illocutionary_force
            .as_deref()
            .ok_or(DialogueError::MissingForce)?;
        text.push_str(&force_sentence(force));
    }
    Ok(InstructionPrompt { text })
}

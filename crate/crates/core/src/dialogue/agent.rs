use super::{
    build_instruction, render_context, ChatTurn, Conversation, DialogueError, InstructionPrompt,
    PromptInputs,
};
use crate::gateway::{Backend, GenerationParams, GenerationResult};
use crate::knowledge::{truncate_chars, KnowledgeDocument};
use crate::speechact::{Classifier, SpeechActLabel};

/// Characters of document text placed in a prompt. Roughly what fits next to
/// the instruction and history in a 4096-token context window.
pub const DEFAULT_KNOWLEDGE_BUDGET: usize = 12_000;

/// Everything one successful [`Agent::respond`] produced.
#[derive(Debug, Clone)]
pub struct Exchange {
    pub user: ChatTurn,
    pub assistant: ChatTurn,
    pub result: GenerationResult,
    pub prompt: InstructionPrompt,
}

impl Exchange {
    pub fn speech_act(&self) -> Option<&SpeechActLabel> {
        self.user.speech_act.as_ref()
    }
}

/// Runs one user query through classification, prompting and generation.
pub struct Agent<'a> {
    backend: &'a dyn Backend,
    classifier: &'a dyn Classifier,
    knowledge_budget: usize,
}

impl<'a> Agent<'a> {
    pub fn new(backend: &'a dyn Backend, classifier: &'a dyn Classifier) -> Self {
        Agent {
            backend,
            classifier,
            knowledge_budget: DEFAULT_KNOWLEDGE_BUDGET,
        }
    }

    pub fn with_knowledge_budget(mut self, chars: usize) -> Self {
        self.knowledge_budget = chars;
        self
    }

    /// Every user turn is classified and the label stored, whether or not it
    /// goes into the prompt. A classifier failure only aborts the exchange
    /// when the label is needed.
    ///
    /// The conversation is touched only after generation succeeds.
    pub fn respond(
        &self,
        conversation: &mut Conversation,
        doc: &KnowledgeDocument,
        query: &str,
        include_force: bool,
        params: &GenerationParams,
    ) -> Result<Exchange, DialogueError> {
        if query.trim().is_empty() {
            return Err(DialogueError::EmptyInput("query"));
        }
        if conversation.doc_id != doc.id {
            return Err(DialogueError::DocumentMismatch {
                conversation: conversation.id.clone(),
                expected: conversation.doc_id.clone(),
                got: doc.id.clone(),
            });
        }
        let label = match self.classifier.classify(query) {
            Ok(label) => Some(label),
            Err(e) if include_force => return Err(e.into()),
            Err(e) => {
                log::warn!("speech act classification failed: {e}");
                None
            }
        };

        let (knowledge, truncated) = truncate_chars(&doc.text, self.knowledge_budget);
        if truncated {
            log::warn!(
                "document {} truncated to {} characters for the prompt",
                doc.id,
                self.knowledge_budget
            );
        }
        let inputs = PromptInputs {
            user_input: query.to_string(),
            context: render_context(&conversation.turns),
            knowledge_text: knowledge.to_string(),
            illocutionary_force: label.map(|l| l.category.to_string()),
            include_illocutionary_force: include_force,
        };
        let prompt = build_instruction(&inputs)?;
        let result = self
            .backend
            .generate(&conversation.model, &prompt.text, params)?;

        let user = ChatTurn::user(query, label);
        let assistant = ChatTurn::assistant(result.text.clone());
        conversation.push_exchange(user.clone(), assistant.clone())?;
        Ok(Exchange {
            user,
            assistant,
            result,
            prompt,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::Role;
    use crate::gateway::{MockBackend, ModelSpec};
    use crate::knowledge::DocFormat;
    use crate::speechact::{RuleClassifier, SpeechActCategory, SpeechActError};

    fn doc(text: &str) -> KnowledgeDocument {
        KnowledgeDocument {
            id: "doc".into(),
            title: "Doc".into(),
            format: DocFormat::Txt,
            text: text.into(),
            byte_size: text.len() as u64,
        }
    }

    fn conversation() -> Conversation {
        Conversation::new("c1", "doc", ModelSpec::named("mock"))
    }

    #[test]
    fn fresh_exchange_appends_two_turns() {
        let backend = MockBackend::new();
        let classifier = RuleClassifier::default();
        let agent = Agent::new(&backend, &classifier);
        let mut c = conversation();
        let ex = agent
            .respond(&mut c, &doc("Children grow."), "How do kids grow?", false, &GenerationParams::default())
            .unwrap();
        assert_eq!(c.turns.len(), 2);
        assert_eq!(c.turns[1].text, ex.result.text);
        assert!(ex.result.text.starts_with("MOCK(mock|"));
        assert!(ex.result.text.ends_with("): How do kids grow?"));
        assert!(!backend.prompts()[0].prompt.contains("communicative intent"));
    }

    #[test]
    fn force_label_is_stored_and_prompted() {
        let backend = MockBackend::new();
        let classifier = RuleClassifier::default();
        let agent = Agent::new(&backend, &classifier);
        let mut c = conversation();
        let ex = agent
            .respond(&mut c, &doc("K."), "That’s great, thanks for helping.", true, &GenerationParams::default())
            .unwrap();
        assert_eq!(ex.speech_act().unwrap().category, SpeechActCategory::Expressive);
        assert_eq!(c.turns[0].speech_act.unwrap().category, SpeechActCategory::Expressive);
        assert!(backend.prompts()[0]
            .prompt
            .ends_with("characterized by the speech acts: 'expressive'."));
    }

    #[test]
    fn second_call_sees_first_exchange() {
        let backend = MockBackend::new();
        let classifier = RuleClassifier::default();
        let agent = Agent::new(&backend, &classifier);
        let mut c = conversation();
        let d = doc("K.");
        let p = GenerationParams::default();
        let first = agent.respond(&mut c, &d, "first?", false, &p).unwrap();
        agent.respond(&mut c, &d, "second", false, &p).unwrap();
        let prompt = &backend.prompts()[1].prompt;
        let expected = format!("Relevant context: \"User: first?\nAssistant: {}\"", first.result.text);
        assert!(prompt.contains(&expected), "{prompt}");
        let roles: Vec<_> = c.turns.iter().map(|t| t.role).collect();
        assert_eq!(roles, [Role::User, Role::Assistant, Role::User, Role::Assistant]);
    }

    #[test]
    fn failure_leaves_conversation_unchanged() {
        let backend = MockBackend::new().with_failing_model("mock");
        let classifier = RuleClassifier::default();
        let agent = Agent::new(&backend, &classifier);
        let mut c = conversation();
        assert!(agent
            .respond(&mut c, &doc("K."), "q", true, &GenerationParams::default())
            .is_err());
        assert!(c.turns.is_empty());

        let down = MockBackend::unreachable();
        let agent = Agent::new(&down, &classifier);
        let err = agent
            .respond(&mut c, &doc("K."), "q", false, &GenerationParams::default())
            .unwrap_err();
        assert!(matches!(err, DialogueError::Gateway(_)));
        assert!(c.turns.is_empty());
    }

    struct Broken;
    impl Classifier for Broken {
        fn classify(&self, _: &str) -> Result<SpeechActLabel, SpeechActError> {
            Err(SpeechActError::UnmappedLabel("LABEL_9".into()))
        }
    }

    #[test]
    fn classifier_failure_matters_only_with_force() {
        let backend = MockBackend::new();
        let agent = Agent::new(&backend, &Broken);
        let mut c = conversation();
        let p = GenerationParams::default();
        assert!(matches!(
            agent.respond(&mut c, &doc("K."), "q", true, &p),
            Err(DialogueError::SpeechAct(_))
        ));
        let ex = agent.respond(&mut c, &doc("K."), "q", false, &p).unwrap();
        assert!(ex.speech_act().is_none());
        assert_eq!(c.turns.len(), 2);
    }

    #[test]
    fn long_documents_are_truncated() {
        let backend = MockBackend::new();
        let classifier = RuleClassifier::default();
        let agent = Agent::new(&backend, &classifier).with_knowledge_budget(5);
        let mut c = conversation();
        agent
            .respond(&mut c, &doc("abcdefghij"), "q", false, &GenerationParams::default())
            .unwrap();
        assert!(backend.prompts()[0].prompt.contains("respond: 'abcde'."));
    }

    #[test]
    fn document_mismatch() {
        let backend = MockBackend::new();
        let classifier = RuleClassifier::default();
        let agent = Agent::new(&backend, &classifier);
        let mut c = Conversation::new("c1", "other", ModelSpec::named("mock"));
        assert!(matches!(
            agent.respond(&mut c, &doc("K."), "q", false, &GenerationParams::default()),
            Err(DialogueError::DocumentMismatch { .. })
        ));
    }
}

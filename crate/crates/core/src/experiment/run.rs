use super::{ExperimentConfig, ExperimentError, RowScores, RunRecord, Turn};
use crate::dialogue::{Agent, Conversation, DEFAULT_KNOWLEDGE_BUDGET};
use crate::gateway::{Backend, Embedder};
use crate::knowledge::{KnowledgeDocument, KnowledgeStore};
use crate::metrics::{EvalOptions, Evaluator};
use crate::speechact::Classifier;

/// Executes an [`ExperimentConfig`] strictly sequentially, so measured
/// response times are not skewed by concurrent generations.
pub struct Runner<'a> {
    backend: &'a dyn Backend,
    classifier: &'a dyn Classifier,
    embedder: &'a dyn Embedder,
    store: &'a KnowledgeStore,
    eval: EvalOptions,
    knowledge_budget: usize,
}

impl<'a> Runner<'a> {
    pub fn new(
        backend: &'a dyn Backend,
        classifier: &'a dyn Classifier,
        embedder: &'a dyn Embedder,
        store: &'a KnowledgeStore,
    ) -> Self {
        Runner {
            backend,
            classifier,
            embedder,
            store,
            eval: EvalOptions::default(),
            knowledge_budget: DEFAULT_KNOWLEDGE_BUDGET,
        }
    }

    pub fn with_eval_options(mut self, eval: EvalOptions) -> Self {
        self.eval = eval;
        self
    }

    pub fn with_knowledge_budget(mut self, chars: usize) -> Self {
        self.knowledge_budget = chars;
        self
    }

    /// Runs every (document, model, arm) as its own conversation, issuing the
    /// document's queries in order. Failed generations or evaluations become
    /// rows without scores; only an invalid config or unknown document aborts.
    ///
    /// Records come back ordered by arm, document, turn and model, numbered
    /// from 1.
    pub fn run(&self, config: &ExperimentConfig) -> Result<Vec<RunRecord>, ExperimentError> {
        config.validate()?;
        let docs: Vec<KnowledgeDocument> = config
            .documents
            .iter()
            .map(|d| self.store.resolve(&d.doc_id))
            .collect::<Result<_, _>>()?;
        let agent = Agent::new(self.backend, self.classifier).with_knowledge_budget(self.knowledge_budget);

        let mut keyed = Vec::new();
        for (di, (dq, doc)) in config.documents.iter().zip(&docs).enumerate() {
            let evaluator = Evaluator::new(doc, self.eval.clone());
            if let Err(e) = &evaluator {
                log::warn!("document {} cannot be scored: {e}", doc.id);
            }
            for (mi, model) in config.models.iter().enumerate() {
                for (ai, &arm) in config.arms.iter().enumerate() {
                    let mut conversation = Conversation::new(
                        format!("{}-{}-{}", dq.doc_id, model.name, arm),
                        doc.id.clone(),
                        model.clone(),
                    );
                    for (qi, query) in dq.queries.iter().enumerate() {
                        let scores = agent
                            .respond(&mut conversation, doc, query, arm.includes_force(), &config.params)
                            .map_err(|e| e.to_string())
                            .and_then(|ex| {
                                let ev = evaluator.as_ref().map_err(|e| e.to_string())?;
                                ev.evaluate(&ex.result, query, self.embedder)
                                    .map_err(|e| e.to_string())
                            });
                        let scores = match scores {
                            Ok(report) => Some(RowScores::from(&report)),
                            Err(e) => {
                                log::warn!(
                                    "{} / {} / {arm} / query {}: {e}",
                                    dq.doc_id,
                                    model.name,
                                    qi + 1
                                );
                                None
                            }
                        };
                        let record = RunRecord {
                            serial: 0,
                            doc_id: dq.doc_id.clone(),
                            model: model.name.clone(),
                            turn: Turn(qi as u32 + 1),
                            arm,
                            scores,
                        };
                        keyed.push(((ai, di, qi, mi), record));
                    }
                }
            }
        }
        keyed.sort_by_key(|(k, _)| *k);
        Ok(keyed
            .into_iter()
            .zip(1..)
            .map(|((_, mut r), serial)| {
                r.serial = serial;
                r
            })
            .collect())
    }
}

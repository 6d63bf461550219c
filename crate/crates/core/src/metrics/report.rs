use std::collections::HashMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::meteor::SynonymLexicon;
use super::{
    best_matching_window, bertscore_texts, meteor_with, perplexity, qa_cand, qa_ref, rouge_l,
    rouge_n, tokenize, train_ngram, BertGranularity, MetricsError, NgramModel, Prf,
};
use crate::gateway::{EmbeddingVector, Embedder, GatewayError, GenerationResult};
use crate::knowledge::{segment, DocumentSegment, KnowledgeDocument};

/// Display names of the ten metrics, in table order.
pub const METRIC_NAMES: [&str; 10] = [
    "BERT-Precision",
    "BERT-Recall",
    "BERT-F1",
    "QA-Ref",
    "QA-Cand",
    "ROUGE-1",
    "ROUGE-2",
    "ROUGE-L",
    "METEOR",
    "Perplexity",
];

/// All ten scores for one response, plus its latency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rouge1: Prf<f64>,
    pub rouge2: Prf<f64>,
    pub rouge_l: Prf<f64>,
    pub qa_ref: f64,
    pub qa_cand: f64,
    pub bert: Prf<f64>,
    pub meteor: f64,
    pub perplexity: f64,
    pub response_time_s: f64,
}

impl MetricReport {
    /// The ten metric values in [`METRIC_NAMES`] order. ROUGE contributes its F1.
    pub fn values(&self) -> [f64; 10] {
        [
            self.bert.precision,
            self.bert.recall,
            self.bert.f1,
            self.qa_ref,
            self.qa_cand,
            self.rouge1.f1,
            self.rouge2.f1,
            self.rouge_l.f1,
            self.meteor,
            self.perplexity,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite()) && self.response_time_s.is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub bert_granularity: BertGranularity,
    pub synonyms: SynonymLexicon,
    pub ngram_order: usize,
    pub ngram_k: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            bert_granularity: BertGranularity::Token,
            synonyms: SynonymLexicon::default(),
            ngram_order: 2,
            ngram_k: 1.0,
        }
    }
}

/// Memoizes embeddings for the duration of one evaluator.
struct Cached<'a> {
    inner: &'a dyn Embedder,
    memo: &'a Mutex<HashMap<String, EmbeddingVector>>,
}

impl Embedder for Cached<'_> {
    fn embed(&self, text: &str) -> Result<EmbeddingVector, GatewayError> {
        if let Some(v) = self.memo.lock().expect("embedding cache poisoned").get(text) {
            return Ok(v.clone());
        }
        let v = self.inner.embed(text)?;
        self.memo
            .lock()
            .expect("embedding cache poisoned")
            .insert(text.to_string(), v.clone());
        Ok(v)
    }

    fn embeds_tokens(&self) -> bool {
        self.inner.embeds_tokens()
    }
}

/// Scores responses against one grounding document. Segmentation and the
/// n-gram model are built once; embeddings are memoized per evaluator, so
/// use one evaluator per embedder.
pub struct Evaluator {
    segments: Vec<DocumentSegment>,
    model: NgramModel<f64>,
    options: EvalOptions,
    memo: Mutex<HashMap<String, EmbeddingVector>>,
}

impl Evaluator {
    pub fn new(doc: &KnowledgeDocument, options: EvalOptions) -> Result<Self, MetricsError> {
        let model = train_ngram(&tokenize(&doc.text), options.ngram_order, options.ngram_k)?;
        let segments = segment(doc);
        if segments.is_empty() {
            return Err(MetricsError::EmptyInput("document segments"));
        }
        Ok(Evaluator {
            segments,
            model,
            options,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn segments(&self) -> &[DocumentSegment] {
        &self.segments
    }

    /// Reference segment for lexical and BERT-style scores.
    pub fn reference_for(&self, response: &str, query: &str) -> &DocumentSegment {
        best_matching_window(&self.segments, &format!("{response} {query}"))
            .expect("segments are non-empty")
    }

    pub fn evaluate(
        &self,
        response: &GenerationResult,
        query: &str,
        embedder: &dyn Embedder,
    ) -> Result<MetricReport, MetricsError> {
        if query.trim().is_empty() {
            return Err(MetricsError::EmptyInput("query"));
        }
        let embedder = Cached {
            inner: embedder,
            memo: &self.memo,
        };
        let text = response.text.as_str();
        let cand = tokenize(text);
        if cand.is_empty() {
            return Err(MetricsError::EmptyCandidate);
        }
        let reference = self.reference_for(text, query);
        let ref_tokens = tokenize(&reference.text);
        let answer = best_matching_window(&self.segments, query).expect("segments are non-empty");

        let report = MetricReport {
            rouge1: rouge_n(&cand, &ref_tokens, 1),
            rouge2: rouge_n(&cand, &ref_tokens, 2),
            rouge_l: rouge_l(&cand, &ref_tokens),
            qa_ref: qa_ref(text, &answer.text, &embedder)?,
            qa_cand: qa_cand(text, &self.segments, &embedder)?,
            bert: bertscore_texts(text, &reference.text, &embedder, self.options.bert_granularity)?,
            meteor: meteor_with(&cand, &ref_tokens, &self.options.synonyms),
            perplexity: perplexity(&self.model, &cand)?,
            response_time_s: response.response_time_s,
        };
        if !report.is_finite() {
            return Err(MetricsError::InvalidModel("non-finite metric value".into()));
        }
        Ok(report)
    }
}

/// One-off evaluation with default options.
pub fn evaluate(
    response: &GenerationResult,
    query: &str,
    doc: &KnowledgeDocument,
    embedder: &dyn Embedder,
) -> Result<MetricReport, MetricsError> {
    Evaluator::new(doc, EvalOptions::default())?.evaluate(response, query, embedder)
}

//! Response quality metrics.
//!
//! Lexical scores (ROUGE-1/2/L, METEOR, n-gram perplexity) work on
//! [`TokenStream`]s; semantic scores (BERT-style P/R/F1, QA-Ref, QA-Cand) work
//! on embeddings from an [`Embedder`](crate::gateway::Embedder). The numeric
//! kernels are generic over [`Scalar`] so they run in `f32` or `f64`;
//! [`MetricReport`] fixes `f64` for serialization.

mod bert;
pub mod meteor;
mod ngram;
mod qa;
mod report;
mod rouge;
pub mod stem;

use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GatewayError;
use crate::Scalar;

pub use bert::{bertscore, bertscore_texts, BertGranularity};
pub use meteor::{meteor, meteor_with, MeteorAlignment};
pub use ngram::{perplexity, train_ngram, NgramModel, UNKNOWN_TOKEN};
pub use qa::{best_matching_window, qa_cand, qa_ref, unigram_overlap_f1};
pub use report::{evaluate, EvalOptions, Evaluator, MetricReport, METRIC_NAMES};
pub use rouge::{lcs_len, rouge_l, rouge_n};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("candidate has no tokens")]
    EmptyCandidate,
    #[error("training text has no tokens")]
    EmptyTraining,
    #[error("invalid n-gram model parameter: {0}")]
    InvalidModel(String),
    #[error("embedding failed: {0}")]
    Embedding(#[from] GatewayError),
}

/// Lowercased tokens produced by [`tokenize`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenStream(Vec<String>);

impl TokenStream {
    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl Deref for TokenStream {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl<S: Into<String>> FromIterator<S> for TokenStream {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenStream(iter.into_iter().map(Into::into).collect())
    }
}

/// Canonical tokenizer: lowercase, split on whitespace, trim non-alphanumeric
/// characters off both ends of each piece, drop what is left empty.
/// Interior punctuation is kept (`"A—B"` → `["a—b"]`).
pub fn tokenize(text: &str) -> TokenStream {
    text.split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf<F> {
    pub precision: F,
    pub recall: F,
    pub f1: F,
}

impl<F: Scalar> Prf<F> {
    /// F1 is zero unless both components are positive.
    pub fn from_pr(precision: F, recall: F) -> Self {
        let f1 = if precision > F::zero() && recall > F::zero() {
            let two = F::one() + F::one();
            two * precision * recall / (precision + recall)
        } else {
            F::zero()
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }

    pub fn uniform(value: F) -> Self {
        Prf {
            precision: value,
            recall: value,
            f1: value,
        }
    }

    pub fn zero() -> Self {
        Self::uniform(F::zero())
    }

    /// Convert to another float width.
    pub fn cast<G: Scalar>(self) -> Prf<G> {
        Prf {
            precision: G::from_f64_lossy(self.precision.to_f64_lossy()),
            recall: G::from_f64_lossy(self.recall.to_f64_lossy()),
            f1: G::from_f64_lossy(self.f1.to_f64_lossy()),
        }
    }
}

/// `num / den`, or zero when the denominator is zero.
pub(crate) fn ratio<F: Scalar>(num: usize, den: usize) -> F {
    if den == 0 {
        F::zero()
    } else {
        F::from_count(num) / F::from_count(den)
    }
}

/// Cosine similarity; zero if either vector has zero norm.
///
/// # Panics
/// If the slices differ in length.
pub fn cosine<F: Scalar>(a: &[F], b: &[F]) -> F {
    assert_eq!(a.len(), b.len(), "cosine of vectors with different lengths");
    let (mut dot, mut na, mut nb) = (F::zero(), F::zero(), F::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na <= F::zero() || nb <= F::zero() {
        return F::zero();
    }
    let c = dot / (na.sqrt() * nb.sqrt());
    c.max(-F::one()).min(F::one())
}

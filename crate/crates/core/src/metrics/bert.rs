use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{cosine, tokenize, MetricsError, Prf};
use crate::gateway::Embedder;
use crate::Scalar;

/// What gets embedded for BERT-style scoring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BertGranularity {
    /// One vector per token, greedy max-cosine matching.
    #[default]
    Token,
    /// One vector per text; precision, recall and F1 all equal the cosine.
    Text,
}

/// Greedy matching: precision averages each candidate vector's best cosine
/// against the reference, recall the other way round.
pub fn bertscore<F: Scalar>(cand: &[Vec<F>], reference: &[Vec<F>]) -> Result<Prf<F>, MetricsError> {
    if cand.is_empty() {
        return Err(MetricsError::EmptyInput("candidate embeddings"));
    }
    if reference.is_empty() {
        return Err(MetricsError::EmptyInput("reference embeddings"));
    }
    let dim = cand[0].len();
    if let Some(bad) = cand.iter().chain(reference).find(|v| v.len() != dim) {
        return Err(MetricsError::DimensionMismatch(dim, bad.len()));
    }
    let best_mean = |from: &[Vec<F>], to: &[Vec<F>]| {
        let total = from.iter().fold(F::zero(), |acc, x| {
            let best = to
                .iter()
                .map(|y| cosine(x, y))
                .fold(F::neg_infinity(), F::max);
            acc + best
        });
        total / F::from_count(from.len())
    };
    let precision = best_mean(cand, reference);
    let recall = best_mean(reference, cand);
    Ok(Prf::from_pr(precision, recall))
}

fn token_vectors(
    text: &str,
    embedder: &dyn Embedder,
    cache: &mut HashMap<String, Vec<f64>>,
) -> Result<Vec<Vec<f64>>, MetricsError> {
    let tokens = tokenize(text);
    let mut out = Vec::with_capacity(tokens.len());
    for token in tokens.iter() {
        if !cache.contains_key(token) {
            let v = embedder.embed(token)?.values;
            cache.insert(token.clone(), v);
        }
        out.push(cache[token].clone());
    }
    Ok(out)
}

/// BERT-style triple between two texts using `embedder`.
///
/// With [`BertGranularity::Token`] every distinct token is embedded once. If
/// the embedder only handles whole texts, or `Text` is requested, the score
/// degrades to a single cosine shared by all three components.
pub fn bertscore_texts(
    cand: &str,
    reference: &str,
    embedder: &dyn Embedder,
    granularity: BertGranularity,
) -> Result<Prf<f64>, MetricsError> {
    if granularity == BertGranularity::Text || !embedder.embeds_tokens() {
        if cand.trim().is_empty() || reference.trim().is_empty() {
            return Err(MetricsError::EmptyInput("bert text"));
        }
        let a = embedder.embed(cand)?.values;
        let b = embedder.embed(reference)?.values;
        if a.len() != b.len() {
            return Err(MetricsError::DimensionMismatch(a.len(), b.len()));
        }
        return Ok(Prf::uniform(cosine(&a, &b)));
    }
    let mut cache = HashMap::new();
    let c = token_vectors(cand, embedder, &mut cache)?;
    let r = token_vectors(reference, embedder, &mut cache)?;
    bertscore(&c, &r)
}

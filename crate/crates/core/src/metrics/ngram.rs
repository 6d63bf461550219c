use std::collections::{HashMap, HashSet};

use super::MetricsError;
use crate::Scalar;

/// Symbol every out-of-vocabulary token is mapped to. The tokenizer strips
/// the surrounding brackets, so it can never collide with a real token.
pub const UNKNOWN_TOKEN: &str = "<unk>";

/// Add-k smoothed unigram or bigram model.
#[derive(Debug, Clone)]
pub struct NgramModel<F> {
    order: usize,
    k: F,
    unigrams: HashMap<String, usize>,
    bigrams: HashMap<(String, String), usize>,
    /// Number of bigrams starting with each token.
    contexts: HashMap<String, usize>,
    total: usize,
}

impl<F: Scalar> NgramModel<F> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn smoothing(&self) -> F {
        self.k
    }

    /// Vocabulary including [`UNKNOWN_TOKEN`].
    pub fn vocab(&self) -> impl Iterator<Item = &str> {
        self.unigrams
            .keys()
            .map(String::as_str)
            .chain(std::iter::once(UNKNOWN_TOKEN))
    }

    /// |V| counting the unknown symbol.
    pub fn vocab_size(&self) -> usize {
        self.unigrams.len() + 1
    }

    fn known<'a>(&self, token: &'a str) -> &'a str {
        if self.unigrams.contains_key(token) {
            token
        } else {
            UNKNOWN_TOKEN
        }
    }

    pub fn unigram_prob(&self, token: &str) -> F {
        let c = self.unigrams.get(self.known(token)).copied().unwrap_or(0);
        let v = F::from_count(self.vocab_size());
        (F::from_count(c) + self.k) / (F::from_count(self.total) + self.k * v)
    }

    pub fn bigram_prob(&self, prev: &str, token: &str) -> F {
        let prev = self.known(prev).to_string();
        let token = self.known(token).to_string();
        let context = self.contexts.get(&prev).copied().unwrap_or(0);
        let pair = self.bigrams.get(&(prev, token)).copied().unwrap_or(0);
        let v = F::from_count(self.vocab_size());
        (F::from_count(pair) + self.k) / (F::from_count(context) + self.k * v)
    }

    /// Probability of `token` given the preceding token (ignored for order 1).
    pub fn prob(&self, prev: Option<&str>, token: &str) -> F {
        match (self.order, prev) {
            (2, Some(p)) => self.bigram_prob(p, token),
            _ => self.unigram_prob(token),
        }
    }
}

/// Train an add-`k` model of the given order (1 or 2) on `doc`.
pub fn train_ngram<F: Scalar>(doc: &[String], order: usize, k: F) -> Result<NgramModel<F>, MetricsError> {
    if !(order == 1 || order == 2) {
        return Err(MetricsError::InvalidModel(format!("order {order} (expected 1 or 2)")));
    }
    if k.is_nan() || k <= F::zero() {
        return Err(MetricsError::InvalidModel(format!("smoothing constant {k} must be > 0")));
    }
    if doc.is_empty() {
        return Err(MetricsError::EmptyTraining);
    }
    let mut unigrams = HashMap::new();
    for t in doc {
        *unigrams.entry(t.clone()).or_insert(0) += 1;
    }
    let mut bigrams = HashMap::new();
    let mut contexts = HashMap::new();
    for w in doc.windows(2) {
        *bigrams.entry((w[0].clone(), w[1].clone())).or_insert(0) += 1;
        *contexts.entry(w[0].clone()).or_insert(0) += 1;
    }
    Ok(NgramModel {
        order,
        k,
        unigrams,
        bigrams,
        contexts,
        total: doc.len(),
    })
}

/// `exp(-(1/N) Σ log p)`: the first token scored by the unigram estimate,
/// every later one by the bigram estimate (for order 2).
pub fn perplexity<F: Scalar>(model: &NgramModel<F>, cand: &[String]) -> Result<F, MetricsError> {
    if cand.is_empty() {
        return Err(MetricsError::EmptyCandidate);
    }
    let mut log_sum = F::zero();
    for (i, token) in cand.iter().enumerate() {
        let prev = i.checked_sub(1).map(|p| cand[p].as_str());
        log_sum = log_sum + model.prob(prev, token).ln();
    }
    Ok((-log_sum / F::from_count(cand.len())).exp())
}

impl<F: Scalar> NgramModel<F> {
    /// Contexts worth checking for normalization: every known token plus the
    /// unknown symbol.
    pub fn contexts(&self) -> HashSet<&str> {
        self.vocab().collect()
    }
}

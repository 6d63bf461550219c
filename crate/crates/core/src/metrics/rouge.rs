use std::collections::HashMap;

use super::{ratio, Prf};
use crate::Scalar;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// ROUGE-N with clipped n-gram counts.
///
/// # Panics
/// If `n` is zero.
pub fn rouge_n<F: Scalar>(cand: &[String], reference: &[String], n: usize) -> Prf<F> {
    assert!(n >= 1, "ROUGE-N needs n >= 1");
    let cand_counts = ngram_counts(cand, n);
    let ref_counts = ngram_counts(reference, n);
    let overlap: usize = cand_counts
        .iter()
        .map(|(gram, &c)| c.min(ref_counts.get(gram).copied().unwrap_or(0)))
        .sum();
    let cand_total = cand.len().saturating_sub(n - 1);
    let ref_total = reference.len().saturating_sub(n - 1);
    Prf::from_pr(ratio(overlap, cand_total), ratio(overlap, ref_total))
}

/// Length of the longest common subsequence, O(|a|·|b|) time, O(|b|) space.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { above.max(row[j]) };
            diag = above;
        }
    }
    row[b.len()]
}

pub fn rouge_l<F: Scalar>(cand: &[String], reference: &[String]) -> Prf<F> {
    let l = lcs_len(cand, reference);
    Prf::from_pr(ratio(l, cand.len()), ratio(l, reference.len()))
}

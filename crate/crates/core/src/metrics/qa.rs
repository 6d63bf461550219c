use super::{cosine, rouge_n, tokenize, MetricsError};
use crate::gateway::Embedder;
use crate::knowledge::DocumentSegment;

fn embed_pair(a: &str, b: &str, embedder: &dyn Embedder) -> Result<f64, MetricsError> {
    let va = embedder.embed(a)?.values;
    let vb = embedder.embed(b)?.values;
    if va.len() != vb.len() {
        return Err(MetricsError::DimensionMismatch(va.len(), vb.len()));
    }
    Ok(cosine(&va, &vb))
}

/// Cosine between the response and the reference answer.
pub fn qa_ref(response: &str, reference_answer: &str, embedder: &dyn Embedder) -> Result<f64, MetricsError> {
    if response.trim().is_empty() {
        return Err(MetricsError::EmptyInput("response"));
    }
    if reference_answer.trim().is_empty() {
        return Err(MetricsError::EmptyInput("reference answer"));
    }
    embed_pair(response, reference_answer, embedder)
}

/// Best cosine between the response and any candidate segment.
pub fn qa_cand(
    response: &str,
    segments: &[DocumentSegment],
    embedder: &dyn Embedder,
) -> Result<f64, MetricsError> {
    if response.trim().is_empty() {
        return Err(MetricsError::EmptyInput("response"));
    }
    if segments.is_empty() {
        return Err(MetricsError::EmptyInput("segments"));
    }
    let r = embedder.embed(response)?.values;
    let mut best = f64::NEG_INFINITY;
    for seg in segments {
        let v = embedder.embed(&seg.text)?.values;
        if v.len() != r.len() {
            return Err(MetricsError::DimensionMismatch(r.len(), v.len()));
        }
        best = best.max(cosine(&r, &v));
    }
    Ok(best)
}

/// Unigram-overlap F1 between two texts.
pub fn unigram_overlap_f1(a: &str, b: &str) -> f64 {
    rouge_n::<f64>(&tokenize(a), &tokenize(b), 1).f1
}

/// Segment with the highest unigram-overlap F1 against `probe`; the lowest
/// index wins ties. `None` only for an empty slice.
pub fn best_matching_window<'a>(
    segments: &'a [DocumentSegment],
    probe: &str,
) -> Option<&'a DocumentSegment> {
    let probe = tokenize(probe);
    let mut best: Option<(&DocumentSegment, f64)> = None;
    for seg in segments {
        let score = rouge_n::<f64>(&tokenize(&seg.text), &probe, 1).f1;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((seg, score));
        }
    }
    best.map(|(seg, _)| seg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{BackendEmbedder, MockBackend, ModelSpec};
    use proptest::prelude::*;

    fn embedder() -> BackendEmbedder<MockBackend> {
        BackendEmbedder::new(MockBackend::new(), ModelSpec::named("mock-embed"))
    }

    fn segs(texts: &[&str]) -> Vec<DocumentSegment> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| DocumentSegment {
                doc_id: "d".into(),
                index: i,
                text: t.to_string(),
                char_span: (0, 0),
            })
            .collect()
    }

    #[test]
    fn qa_ref_values() {
        let e = embedder();
        assert!((qa_ref("hello there", "hello there", &e).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(qa_ref("a", "b", &e).unwrap(), 0.0);
        assert!((qa_ref("a b", "a c", &e).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(qa_ref("", "x", &e), Err(MetricsError::EmptyInput(_))));
    }

    #[test]
    fn qa_cand_values() {
        let e = embedder();
        let s = segs(&["a c", "x y z", "q"]);
        assert!((qa_cand("x y z", &s, &e).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(qa_cand("m n", &segs(&["a", "b"]), &e).unwrap(), 0.0);
        assert!(matches!(qa_cand("a", &[], &e), Err(MetricsError::EmptyInput(_))));
    }

    #[test]
    fn best_window_picks() {
        let s = segs(&["alpha beta", "gamma delta", "epsilon", "zeta eta theta"]);
        assert_eq!(best_matching_window(&s, "zeta eta theta").unwrap().index, 3);
        assert_eq!(best_matching_window(&s, "nothing shared").unwrap().index, 0);
        assert!(best_matching_window(&[], "x").is_none());
    }

    fn brute_force_pick(segments: &[DocumentSegment], probe: &str) -> usize {
        // score each segment by counting clipped unigram matches directly
        let p = tokenize(probe);
        let scores: Vec<f64> = segments
            .iter()
            .map(|s| {
                let t = tokenize(&s.text);
                let mut pool = p.to_vec();
                let mut m = 0usize;
                for tok in t.iter() {
                    if let Some(i) = pool.iter().position(|x| x == tok) {
                        pool.remove(i);
                        m += 1;
                    }
                }
                if m == 0 {
                    return 0.0;
                }
                let (pr, rc) = (m as f64 / t.len() as f64, m as f64 / p.len() as f64);
                2.0 * pr * rc / (pr + rc)
            })
            .collect();
        let best = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        scores.iter().position(|&s| s == best).unwrap()
    }

    proptest! {
        #[test]
        fn best_window_matches_brute_force(texts in prop::collection::vec("[a-d]( [a-d]){0,5}", 1..6),
                                           probe in "[a-e]( [a-e]){0,6}") {
            let s = segs(&texts.iter().map(String::as_str).collect::<Vec<_>>());
            prop_assert_eq!(best_matching_window(&s, &probe).unwrap().index, brute_force_pick(&s, &probe));
        }

        #[test]
        fn qa_cand_dominates_member_reference(texts in prop::collection::vec("[a-f]( [a-f]){0,4}", 1..5),
                                              response in "[a-f]( [a-f]){0,4}",
                                              pick in 0usize..5) {
            let e = embedder();
            let s = segs(&texts.iter().map(String::as_str).collect::<Vec<_>>());
            let reference = &s[pick % s.len()].text;
            let r = qa_ref(&response, reference, &e).unwrap();
            let c = qa_cand(&response, &s, &e).unwrap();
            prop_assert!(c >= r - 1e-12);
        }
    }
}

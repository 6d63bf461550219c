//! METEOR with the original constants: `Fmean = 10PR / (R + 9P)` and a
//! fragmentation penalty of `0.5 · (chunks / matches)³`.
//!
//! Unigrams are aligned in three stages (exact surface form, Porter stem,
//! synonym group); every stage only considers tokens left unmatched by the
//! earlier ones and aligns one-to-one.

use std::collections::HashMap;
use std::io;
use std::path::Path;

use super::stem::porter_stem;
use super::ratio;
use crate::Scalar;

/// Groups of interchangeable words. Empty by default, which disables the
/// synonym stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    group_of: HashMap<String, usize>,
}

impl SynonymLexicon {
    /// One comma-separated group per line; blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Self {
        let mut group_of = HashMap::new();
        let groups = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        for (id, line) in groups.enumerate() {
            for word in line.split(',').map(|w| w.trim().to_lowercase()) {
                if !word.is_empty() {
                    group_of.entry(word).or_insert(id);
                }
            }
        }
        SynonymLexicon { group_of }
    }

    pub fn load(path: &Path) -> io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }

    fn group(&self, word: &str) -> Option<usize> {
        self.group_of.get(word).copied()
    }
}

/// Matched `(candidate index, reference index)` pairs, sorted by candidate.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MeteorAlignment {
    pub pairs: Vec<(usize, usize)>,
}

impl MeteorAlignment {
    /// Number of maximal runs that are contiguous in both sequences.
    pub fn chunks(&self) -> usize {
        let mut chunks = 0;
        let mut prev: Option<(usize, usize)> = None;
        for &(c, r) in &self.pairs {
            match prev {
                Some((pc, pr)) if c == pc + 1 && r == pr + 1 => {}
                _ => chunks += 1,
            }
            prev = Some((c, r));
        }
        chunks
    }
}

/// Greedy tiling: repeatedly align the longest run of equal keys that is
/// unmatched on both sides (earliest run first on ties). Long runs first keeps
/// the chunk count low.
fn align_stage<K: PartialEq>(
    cand_keys: &[Option<K>],
    ref_keys: &[Option<K>],
    cand_to_ref: &mut [Option<usize>],
    ref_used: &mut [bool],
) {
    let (n, m) = (cand_keys.len(), ref_keys.len());
    let mut run = vec![vec![0usize; m + 1]; n + 1];
    loop {
        let mut best = (0usize, 0usize, 0usize);
        for i in 0..n {
            for j in 0..m {
                let ok = cand_to_ref[i].is_none()
                    && !ref_used[j]
                    && cand_keys[i].is_some()
                    && cand_keys[i] == ref_keys[j];
                run[i + 1][j + 1] = if ok { run[i][j] + 1 } else { 0 };
                let len = run[i + 1][j + 1];
                if len > best.0 {
                    best = (len, i + 1 - len, j + 1 - len);
                }
            }
        }
        let (len, ci, rj) = best;
        if len == 0 {
            return;
        }
        for k in 0..len {
            cand_to_ref[ci + k] = Some(rj + k);
            ref_used[rj + k] = true;
        }
    }
}

/// Staged unigram alignment between candidate and reference.
pub fn align(cand: &[String], reference: &[String], synonyms: &SynonymLexicon) -> MeteorAlignment {
    let mut cand_to_ref = vec![None; cand.len()];
    let mut ref_used = vec![false; reference.len()];

    let exact = |ts: &[String]| ts.iter().map(|t| Some(t.clone())).collect::<Vec<_>>();
    align_stage(&exact(cand), &exact(reference), &mut cand_to_ref, &mut ref_used);

    let stems = |ts: &[String]| ts.iter().map(|t| Some(porter_stem(t))).collect::<Vec<_>>();
    align_stage(&stems(cand), &stems(reference), &mut cand_to_ref, &mut ref_used);

    if !synonyms.is_empty() {
        let groups = |ts: &[String]| ts.iter().map(|t| synonyms.group(t)).collect::<Vec<_>>();
        align_stage(&groups(cand), &groups(reference), &mut cand_to_ref, &mut ref_used);
    }

    MeteorAlignment {
        pairs: cand_to_ref
            .iter()
            .enumerate()
            .filter_map(|(c, r)| r.map(|r| (c, r)))
            .collect(),
    }
}

/// METEOR without a synonym lexicon.
pub fn meteor<F: Scalar>(cand: &[String], reference: &[String]) -> F {
    meteor_with(cand, reference, &SynonymLexicon::default())
}

pub fn meteor_with<F: Scalar>(cand: &[String], reference: &[String], synonyms: &SynonymLexicon) -> F {
    let alignment = align(cand, reference, synonyms);
    let matches = alignment.pairs.len();
    if matches == 0 {
        return F::zero();
    }
    let precision: F = ratio(matches, cand.len());
    let recall: F = ratio(matches, reference.len());
    let nine = F::from_count(9);
    let ten = F::from_count(10);
    let fmean = ten * precision * recall / (recall + nine * precision);
    let frag: F = ratio(alignment.chunks(), matches);
    let half = F::from_f64_lossy(0.5);
    let penalty = half * frag * frag * frag;
    fmean * (F::one() - penalty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::tokenize;
    use proptest::prelude::*;

    fn t(s: &str) -> Vec<String> {
        tokenize(s).into_inner()
    }

    #[test]
    fn identical_three_tokens() {
        let a = t("the cat sat");
        let score: f64 = meteor(&a, &a);
        let expected = 1.0 - 0.5 * (1.0f64 / 3.0).powi(3);
        assert!((score - expected).abs() < 1e-12);
        assert!((score - 0.981481481).abs() < 1e-6);
    }

    #[test]
    fn one_match_of_two() {
        let score: f64 = meteor(&t("the cat"), &t("the dog"));
        assert!((score - 0.25).abs() < 1e-12);
    }

    #[test]
    fn no_match_scores_zero() {
        assert_eq!(meteor::<f64>(&t("a b"), &t("c d")), 0.0);
        assert_eq!(meteor::<f64>(&[], &t("c d")), 0.0);
    }

    #[test]
    fn stem_stage_matches_inflections() {
        let c = t("children developing quickly");
        let r = t("child development is quick");
        let al = align(&c, &r, &SynonymLexicon::default());
        // developing/development share the stem "develop"
        assert!(al.pairs.contains(&(1, 1)));
        assert!(meteor::<f64>(&c, &r) > 0.0);
    }

    #[test]
    fn synonym_stage_is_optional() {
        let c = t("a big house");
        let r = t("a large house");
        let lex = SynonymLexicon::parse("# sizes\nbig, large , huge\n\nsmall,little\n");
        assert_eq!(align(&c, &r, &SynonymLexicon::default()).pairs.len(), 2);
        let al = align(&c, &r, &lex);
        assert_eq!(al.pairs, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(al.chunks(), 1);
        assert!(meteor_with::<f64>(&c, &r, &lex) > meteor::<f64>(&c, &r));
    }

    #[test]
    fn chunks_count_contiguous_runs() {
        let c = t("the cat sat on the mat");
        let r = t("on the mat the cat sat");
        let al = align(&c, &r, &SynonymLexicon::default());
        assert_eq!(al.pairs.len(), 6);
        assert_eq!(al.chunks(), 2);
    }

    #[test]
    fn works_in_single_precision() {
        let a = t("the cat sat");
        let s: f32 = meteor(&a, &a);
        assert!((s - 0.9814815).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn score_in_unit_interval(a in prop::collection::vec("[a-d]{1,2}", 0..10),
                                  b in prop::collection::vec("[a-d]{1,2}", 0..10)) {
            let s: f64 = meteor(&a, &b);
            prop_assert!((0.0..=1.0).contains(&s));
        }

        #[test]
        fn alignment_is_one_to_one(a in prop::collection::vec("[a-c]", 0..10),
                                   b in prop::collection::vec("[a-c]", 0..10)) {
            let al = align(&a, &b, &SynonymLexicon::default());
            let mut refs: Vec<usize> = al.pairs.iter().map(|p| p.1).collect();
            refs.sort_unstable();
            refs.dedup();
            prop_assert_eq!(refs.len(), al.pairs.len());
        }
    }
}

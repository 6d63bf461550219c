use serde::{Deserialize, Serialize};

use super::{require_text, Classifier, SpeechActCategory, SpeechActError, SpeechActLabel};

/// How a rule's pattern is matched against the normalized utterance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternKind {
    /// Trimmed utterance ends with the pattern text.
    EndsWith,
    /// First word equals the pattern.
    FirstWord,
    /// The pattern's words occur as a contiguous word sequence.
    Phrase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub kind: PatternKind,
    pub pattern: String,
    pub category: SpeechActCategory,
}

impl Rule {
    pub fn new(kind: PatternKind, pattern: &str, category: SpeechActCategory) -> Self {
        Rule {
            kind,
            pattern: pattern.to_lowercase(),
            category,
        }
    }

    fn matches(&self, norm: &Normalized) -> bool {
        match self.kind {
            PatternKind::EndsWith => norm.text.ends_with(self.pattern.as_str()),
            PatternKind::FirstWord => norm.words.first().is_some_and(|w| *w == self.pattern),
            PatternKind::Phrase => {
                let needle: Vec<&str> = self.pattern.split_whitespace().collect();
                !needle.is_empty()
                    && norm
                        .words
                        .windows(needle.len())
                        .any(|w| w.iter().zip(&needle).all(|(a, b)| a == b))
            }
        }
    }
}

/// Ordered rules, first match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTable {
    pub rules: Vec<Rule>,
    pub default_category: SpeechActCategory,
}

const WH_WORDS: &[&str] = &[
    "what", "who", "whom", "whose", "which", "when", "where", "why", "how",
];
const AUX_WORDS: &[&str] = &[
    "is", "are", "am", "was", "were", "do", "does", "did", "can", "could", "will", "would",
    "shall", "should", "may", "might", "must", "have", "has", "had",
];
const EXPRESSIVE: &[&str] = &[
    "thanks", "thank you", "great", "amazing", "brilliant", "sad",
];
const COMMISSIVE: &[&str] = &["i will", "i promise", "we shall"];
const DECLARATION: &[&str] = &["i hereby", "i declare", "i pronounce"];

impl Default for RuleTable {
    /// The shipped table: questions, then evaluative/gratitude words, then
    /// first-person commitments, then performatives, defaulting to assertive.
    fn default() -> Self {
        use PatternKind::*;
        use SpeechActCategory::*;
        let mut rules = vec![Rule::new(EndsWith, "?", Directive)];
        rules.extend(WH_WORDS.iter().map(|w| Rule::new(FirstWord, w, Directive)));
        rules.extend(AUX_WORDS.iter().map(|w| Rule::new(FirstWord, w, Directive)));
        rules.extend(EXPRESSIVE.iter().map(|p| Rule::new(Phrase, p, Expressive)));
        rules.extend(COMMISSIVE.iter().map(|p| Rule::new(Phrase, p, Commissive)));
        rules.extend(DECLARATION.iter().map(|p| Rule::new(Phrase, p, Declaration)));
        RuleTable {
            rules,
            default_category: Assertive,
        }
    }
}

struct Normalized {
    text: String,
    words: Vec<String>,
}

fn normalize(utterance: &str) -> Normalized {
    let text = utterance
        .trim()
        .to_lowercase()
        .replace(['\u{2019}', '\u{2018}'], "'");
    let words = text
        .split(|c: char| !(c.is_alphanumeric() || c == '\''))
        .map(|w| w.trim_matches('\''))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect();
    Normalized { text, words }
}

/// Deterministic classifier over a [`RuleTable`].
#[derive(Debug, Clone, Default)]
pub struct RuleClassifier {
    table: RuleTable,
}

impl RuleClassifier {
    pub fn new(table: RuleTable) -> Self {
        RuleClassifier { table }
    }

    pub fn table(&self) -> &RuleTable {
        &self.table
    }
}

impl Classifier for RuleClassifier {
    fn classify(&self, utterance: &str) -> Result<SpeechActLabel, SpeechActError> {
        let norm = normalize(require_text(utterance)?);
        let category = self
            .table
            .rules
            .iter()
            .find(|r| r.matches(&norm))
            .map_or(self.table.default_category, |r| r.category);
        Ok(SpeechActLabel::certain(category))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use SpeechActCategory::*;

    fn label(s: &str) -> SpeechActCategory {
        RuleClassifier::default().classify(s).unwrap().category
    }

    #[test]
    fn experiment_queries() {
        assert_eq!(label("What can I expect from my young child's development?"), Directive);
        assert_eq!(label("That's great, thanks for helping."), Expressive);
        assert_eq!(
            label("It is quite sad to see the poverty level in Africa. What do you think can be done to solve it?"),
            Directive
        );
        assert_eq!(label("Brilliant, that sounds amazing."), Expressive);
        // typographic apostrophes as typed in the original queries
        assert_eq!(label("That\u{2019}s great, thanks for helping."), Expressive);
    }

    #[test]
    fn remaining_categories() {
        assert_eq!(label("I will send the report tomorrow."), Commissive);
        assert_eq!(label("I hereby open the meeting."), Declaration);
        assert_eq!(label("The sky is blue."), Assertive);
        assert_eq!(label("Could you pass the salt"), Directive);
    }

    #[test]
    fn whole_word_matching() {
        // "greatly" is not "great"
        assert_eq!(label("Prices rose greatly."), Assertive);
    }

    #[test]
    fn empty_utterance() {
        let c = RuleClassifier::default();
        assert!(matches!(c.classify(""), Err(SpeechActError::EmptyUtterance)));
        assert!(matches!(c.classify("  \n"), Err(SpeechActError::EmptyUtterance)));
    }

    #[test]
    fn rule_results_are_certain() {
        let l = RuleClassifier::default().classify("hello there").unwrap();
        assert_eq!(l.confidence, 1.0);
    }

    #[test]
    fn rule_order_decides() {
        let mut table = RuleTable::default();
        let first = table.rules.remove(0);
        table.rules.push(first);
        let reordered = RuleClassifier::new(table);
        // "sad" now fires before the trailing question mark
        let q = "Is it sad?";
        assert_eq!(label(q), Directive);
        assert_eq!(reordered.classify(q).unwrap().category, Directive);
        let q = "so sad?";
        assert_eq!(label(q), Directive);
        assert_eq!(reordered.classify(q).unwrap().category, Expressive);
    }

    proptest! {
        #[test]
        fn classification_is_total(s in "[ -~]{0,60}") {
            let c = RuleClassifier::default();
            match c.classify(&s) {
                Ok(_) => prop_assert!(!s.trim().is_empty()),
                Err(SpeechActError::EmptyUtterance) => prop_assert!(s.trim().is_empty()),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }

        #[test]
        fn case_insensitive(s in "[a-zA-Z ,.?!']{1,60}") {
            prop_assume!(!s.trim().is_empty());
            let c = RuleClassifier::default();
            prop_assert_eq!(
                c.classify(&s).unwrap().category,
                c.classify(&s.to_uppercase()).unwrap().category
            );
        }
    }
}

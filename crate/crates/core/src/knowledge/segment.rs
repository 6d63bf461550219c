use super::{DocumentSegment, KnowledgeDocument};

/// Sentences longer than this many chars are split on whitespace.
pub const MAX_SEGMENT_CHARS: usize = 500;

/// Words whose trailing period does not end a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "no", "fig",
    "inc", "ltd", "co", "corp", "dept", "approx", "u.s", "jan", "feb", "mar", "apr", "jun",
    "jul", "aug", "sep", "sept", "oct", "nov", "dec",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

fn is_abbreviation(text: &str, dot: usize) -> bool {
    let word_start = text[..dot]
        .rfind(char::is_whitespace)
        .map_or(0, |i| i + text[i..].chars().next().map_or(1, char::len_utf8));
    let word = text[word_start..dot]
        .trim_start_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

/// Byte offsets where sentences end (exclusive).
fn sentence_ends(text: &str) -> Vec<usize> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut ends = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (at, c) = chars[i];
        if matches!(c, '.' | '!' | '?') && !(c == '.' && is_abbreviation(text, at)) {
            let mut j = i + 1;
            while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                j += 1;
            }
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            if k > j && k < chars.len() && chars[k].1.is_uppercase() {
                ends.push(chars.get(j).map_or(text.len(), |p| p.0));
                i = k;
                continue;
            }
        }
        i += 1;
    }
    ends.push(text.len());
    ends
}

/// Trim `[start, end)` to its non-whitespace extent.
fn trimmed(text: &str, start: usize, end: usize) -> Option<(usize, usize)> {
    let piece = &text[start..end];
    let lead = piece.len() - piece.trim_start().len();
    let trail = piece.len() - piece.trim_end().len();
    (lead + trail < piece.len()).then(|| (start + lead, end - trail))
}

/// Split a span longer than the limit near the limit's whitespace.
fn split_long(text: &str, start: usize, end: usize, out: &mut Vec<(usize, usize)>) {
    let mut start = start;
    loop {
        let piece = &text[start..end];
        let Some((limit, _)) = piece.char_indices().nth(MAX_SEGMENT_CHARS) else {
            out.push((start, end));
            return;
        };
        let before = piece[..limit].rfind(char::is_whitespace).filter(|&p| p > 0);
        let cut = before
            .or_else(|| piece[limit..].find(char::is_whitespace).map(|p| p + limit))
            .unwrap_or(limit);
        if let Some(span) = trimmed(text, start, start + cut) {
            out.push(span);
        }
        match trimmed(text, start + cut, end) {
            Some((s, _)) => start = s,
            None => return,
        }
    }
}

/// Sentence spans of `text`: a sentence ends at `.`, `!` or `?` (plus any
/// closing quotes) when whitespace and an uppercase letter follow, unless the
/// period closes a known abbreviation.
pub fn segment_text(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    for end in sentence_ends(text) {
        if let Some((s, e)) = trimmed(text, start, end) {
            split_long(text, s, e, &mut spans);
        }
        start = end;
    }
    spans
}

pub fn segment(doc: &KnowledgeDocument) -> Vec<DocumentSegment> {
    segment_text(&doc.text)
        .into_iter()
        .enumerate()
        .map(|(index, (s, e))| DocumentSegment {
            doc_id: doc.id.clone(),
            index,
            text: doc.text[s..e].to_string(),
            char_span: (s, e),
        })
        .collect()
}

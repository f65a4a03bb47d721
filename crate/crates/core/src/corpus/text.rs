//! Word and sentence segmentation shared by every downstream stage.

/// Abbreviations that do not end a sentence when the next word is capitalized.
const ABBREVIATIONS: &[&str] = &["mr", "mrs", "ms", "dr", "st", "vs", "etc", "e.g", "i.e"];

fn is_edge_punct(c: char) -> bool {
    !c.is_alphanumeric()
}

/// Whitespace-separated words with leading and trailing punctuation removed,
/// case preserved. Pure-punctuation words are dropped.
pub fn raw_tokens(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(is_edge_punct))
        .filter(|w| !w.is_empty())
}

/// Lowercased word tokens.
///
/// Interior apostrophes and hyphens survive (`we'll`, `5-star`); anything that
/// is punctuation only (`—`, `...`) is discarded.
pub fn tokenize(text: &str) -> Vec<String> {
    raw_tokens(&text.to_lowercase()).map(str::to_owned).collect()
}

/// Rule-based sentence splitter.
///
/// A sentence ends at a run of `.`, `!` or `?` followed by whitespace or the
/// end of the text, unless the run is a single `.` closing a known
/// abbreviation and the next word starts with an uppercase letter.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        let run_start = i;
        while i < chars.len() && is_terminator(chars[i].1) {
            i += 1;
        }
        let at_end = i == chars.len();
        if !at_end && !chars[i].1.is_whitespace() {
            continue;
        }
        let end_byte = if at_end { text.len() } else { chars[i].0 };
        let single_period = i - run_start == 1 && chars[run_start].1 == '.';
        if single_period && !at_end {
            let before = &text[start..chars[run_start].0];
            if ends_with_abbreviation(before) && next_word_capitalized(&text[end_byte..]) {
                continue;
            }
        }
        push_segment(&mut sentences, &text[start..end_byte]);
        start = end_byte;
    }
    if start < text.len() {
        push_segment(&mut sentences, &text[start..]);
    }
    sentences
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn push_segment(out: &mut Vec<String>, segment: &str) {
    let trimmed = segment.trim();
    if !trimmed.is_empty() {
        out.push(trimmed.to_owned());
    }
}

fn ends_with_abbreviation(before: &str) -> bool {
    let Some(word) = before.split_whitespace().last() else {
        return false;
    };
    let word = word.trim_start_matches(is_edge_punct).to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

fn next_word_capitalized(rest: &str) -> bool {
    rest.trim_start()
        .chars()
        .find(|c| c.is_alphanumeric())
        .is_some_and(char::is_uppercase)
}

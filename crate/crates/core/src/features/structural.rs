use serde::{Deserialize, Serialize};

use crate::corpus::{raw_tokens, split_sentences};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StructuralFeatures {
    pub review_length_words: f64,
    pub avg_word_length_chars: f64,
    pub avg_sentence_length_words: f64,
    pub pct_capitalized_words: f64,
    pub pct_numerals: f64,
}

impl StructuralFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![
            self.review_length_words,
            self.avg_word_length_chars,
            self.avg_sentence_length_words,
            self.pct_capitalized_words,
            self.pct_numerals,
        ]
    }
}

/// Surface statistics of the raw review text.
///
/// A word is capitalized when its first alphabetic character is uppercase;
/// a numeral is a token made only of ASCII digits.
pub fn structural_features(text: &str) -> StructuralFeatures {
    let tokens: Vec<&str> = raw_tokens(text).collect();
    if tokens.is_empty() {
        return StructuralFeatures::default();
    }
    let n = tokens.len() as f64;
    let chars: usize = tokens.iter().map(|t| t.chars().count()).sum();
    let capitalized = tokens
        .iter()
        .filter(|t| t.chars().find(|c| c.is_alphabetic()).is_some_and(char::is_uppercase))
        .count();
    let numerals = tokens.iter().filter(|t| t.chars().all(|c| c.is_ascii_digit())).count();
    let sentences = split_sentences(text).len().max(1);
    StructuralFeatures {
        review_length_words: n,
        avg_word_length_chars: chars as f64 / n,
        avg_sentence_length_words: n / sentences as f64,
        pct_capitalized_words: capitalized as f64 / n,
        pct_numerals: numerals as f64 / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed() {
        let f = structural_features("GREAT stay. Bad WIFI.");
        assert_eq!(f.review_length_words, 4.0);
        assert_eq!(f.pct_capitalized_words, 0.75);
        assert_eq!(f.avg_sentence_length_words, 2.0);
        // GREAT stay Bad WIFI -> 5 + 4 + 3 + 4 = 16 chars
        assert_eq!(f.avg_word_length_chars, 4.0);
        assert_eq!(f.pct_numerals, 0.0);
    }

    #[test]
    fn numerals() {
        let f = structural_features("room 101 had 2 beds");
        assert_eq!(f.pct_numerals, 2.0 / 5.0);
        assert_eq!(structural_features("5-star").pct_numerals, 0.0);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(structural_features(""), StructuralFeatures::default());
        assert_eq!(structural_features(" -- "), StructuralFeatures::default());
    }
}

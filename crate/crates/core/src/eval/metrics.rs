use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::corpus::{split_sentences, tokenize, Label, Review};

/// Confusion counts with deceptive as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            return 0.0;
        }
        (self.tp + self.tn) as f64 / self.total() as f64
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

fn check_aligned(predictions: &[Label], gold: &[Label]) -> Result<()> {
    if predictions.len() != gold.len() {
        return Err(EvalError::Shape(format!("{} predictions vs {} gold labels", predictions.len(), gold.len())));
    }
    if let Some(i) = gold.iter().position(|&l| l == Label::Unknown) {
        return Err(EvalError::Shape(format!("gold label {i} is unknown")));
    }
    Ok(())
}

pub fn confusion_matrix(predictions: &[Label], gold: &[Label]) -> Result<Confusion> {
    check_aligned(predictions, gold)?;
    let mut c = Confusion::default();
    for (&p, &g) in predictions.iter().zip(gold) {
        match (p == Label::Deceptive, g == Label::Deceptive) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// Length statistics of correctly and incorrectly classified reviews. Each
/// field is a mean over reviews of a per-review value; `None` means the
/// partition was empty.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorStats {
    pub avg_words_per_sentence_correct: Option<f64>,
    pub avg_words_per_sentence_incorrect: Option<f64>,
    pub avg_review_words_correct: Option<f64>,
    pub avg_review_words_incorrect: Option<f64>,
    pub avg_word_length_correct: Option<f64>,
    pub avg_word_length_incorrect: Option<f64>,
}

#[derive(Default)]
struct Sums {
    n: usize,
    per_sentence: f64,
    words: f64,
    word_len: f64,
    word_len_n: usize,
}

impl Sums {
    fn push(&mut self, text: &str) {
        let tokens = tokenize(text);
        let sentences = split_sentences(text).len().max(1);
        self.n += 1;
        self.words += tokens.len() as f64;
        self.per_sentence += tokens.len() as f64 / sentences as f64;
        if !tokens.is_empty() {
            let chars: usize = tokens.iter().map(|t| t.chars().count()).sum();
            self.word_len += chars as f64 / tokens.len() as f64;
            self.word_len_n += 1;
        }
    }

    fn mean(total: f64, n: usize) -> Option<f64> {
        (n > 0).then(|| total / n as f64)
    }
}

pub fn error_analysis(predictions: &[Label], gold: &[Label], reviews: &[&Review]) -> Result<ErrorStats> {
    check_aligned(predictions, gold)?;
    if reviews.len() != gold.len() {
        return Err(EvalError::Shape(format!("{} reviews vs {} gold labels", reviews.len(), gold.len())));
    }
    let mut right = Sums::default();
    let mut wrong = Sums::default();
    for ((p, g), r) in predictions.iter().zip(gold).zip(reviews) {
        if p == g { right.push(&r.text) } else { wrong.push(&r.text) }
    }
    Ok(ErrorStats {
        avg_words_per_sentence_correct: Sums::mean(right.per_sentence, right.n),
        avg_words_per_sentence_incorrect: Sums::mean(wrong.per_sentence, wrong.n),
        avg_review_words_correct: Sums::mean(right.words, right.n),
        avg_review_words_incorrect: Sums::mean(wrong.words, wrong.n),
        avg_word_length_correct: Sums::mean(right.word_len, right.word_len_n),
        avg_word_length_incorrect: Sums::mean(wrong.word_len, wrong.word_len_n),
    })
}

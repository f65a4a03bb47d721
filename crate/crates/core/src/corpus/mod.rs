//! Review corpora: parsing, length filtering, class balancing and the
//! stratified split generators used by the validation protocols.

mod io;
mod split;
mod text;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::PathBuf;

use chrono::NaiveDate;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{parse_opspam_dir, parse_reviews_records, read_records, write_records, ParseSummary};
pub use split::{bootstrap_splits, stratified_kfold, Split, SplitKind};
pub use text::{raw_tokens, split_sentences, tokenize};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("path not found: {0}")]
    NotFound(PathBuf),
    #[error("no review files under {0}")]
    EmptyCorpus(PathBuf),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("duplicate review id `{0}`")]
    DuplicateId(String),
    #[error("review `{0}` has empty text")]
    EmptyText(String),
    #[error("review `{id}` has rating {rating}, expected 1..=5")]
    RatingOutOfRange { id: String, rating: i64 },
    #[error("class {0} has no reviews")]
    ClassMissing(Label),
    #[error("class {label} has {count} members, fewer than k={k}")]
    StratificationImpossible { label: Label, count: usize, k: usize },
    #[error("bootstrap resample stayed degenerate after {0} attempts")]
    DegenerateResample(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Deceptive,
    Genuine,
    Unknown,
}

impl Label {
    /// Binary target with Deceptive as the positive class.
    pub fn target(self) -> Option<f64> {
        match self {
            Label::Deceptive => Some(1.0),
            Label::Genuine => Some(0.0),
            Label::Unknown => None,
        }
    }

    pub fn from_probability(p: f64) -> Label {
        if p >= 0.5 {
            Label::Deceptive
        } else {
            Label::Genuine
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Deceptive => "deceptive",
            Label::Genuine => "genuine",
            Label::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    OpSpam,
    YelpStyle,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub id: String,
    pub text: String,
    pub rating: Option<u8>,
    pub date: Option<NaiveDate>,
    pub reviewer_id: Option<String>,
    pub label: Label,
    pub source: Source,
}

impl Review {
    /// Unlabelled review with only an id and text.
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Review {
            id: id.into(),
            text: text.into(),
            rating: None,
            date: None,
            reviewer_id: None,
            label: Label::Unknown,
            source: Source::Other,
        }
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = label;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.text.trim().is_empty() {
            return Err(CorpusError::EmptyText(self.id.clone()));
        }
        if let Some(r) = self.rating {
            if !(1..=5).contains(&r) {
                return Err(CorpusError::RatingOutOfRange { id: self.id.clone(), rating: r.into() });
            }
        }
        Ok(())
    }
}

/// Ordered, id-unique collection of reviews.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    reviews: Vec<Review>,
}

impl Corpus {
    pub fn new(reviews: Vec<Review>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(reviews.len());
        for r in &reviews {
            r.validate()?;
            if !seen.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
        }
        Ok(Corpus { reviews })
    }

    pub fn reviews(&self) -> &[Review] {
        &self.reviews
    }

    pub fn into_reviews(self) -> Vec<Review> {
        self.reviews
    }

    pub fn len(&self) -> usize {
        self.reviews.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reviews.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.reviews.iter().map(|r| r.label).collect()
    }

    pub fn class_counts(&self) -> BTreeMap<Label, usize> {
        let mut counts = BTreeMap::new();
        for r in &self.reviews {
            *counts.entry(r.label).or_insert(0) += 1;
        }
        counts
    }

    pub fn count(&self, label: Label) -> usize {
        self.reviews.iter().filter(|r| r.label == label).count()
    }

    /// Sub-corpus of the given positions, in the given order. Positions may
    /// repeat, in which case ids are no longer unique; use this only for
    /// transient training partitions.
    pub fn select(&self, idx: &[usize]) -> Vec<Review> {
        idx.iter().map(|&i| self.reviews[i].clone()).collect()
    }

    fn from_trusted(reviews: Vec<Review>) -> Self {
        Corpus { reviews }
    }
}

/// Keep reviews with at most `max_words` tokens. Order is preserved.
pub fn filter_by_length(corpus: &Corpus, max_words: usize) -> Result<Corpus> {
    if max_words == 0 {
        return Err(CorpusError::InvalidArgument("max_words must be at least 1".into()));
    }
    let kept = corpus
        .reviews
        .iter()
        .filter(|r| raw_tokens(&r.text).count() <= max_words)
        .cloned()
        .collect();
    Ok(Corpus::from_trusted(kept))
}

/// Downsample both classes to the size of the smaller one.
///
/// Unlabelled reviews are dropped. Surviving reviews keep their original
/// relative order.
pub fn balance_classes(corpus: &Corpus, seed: u64) -> Result<Corpus> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_class: Vec<Vec<usize>> = Vec::new();
    for label in [Label::Deceptive, Label::Genuine] {
        let members: Vec<usize> = corpus
            .reviews
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            return Err(CorpusError::ClassMissing(label));
        }
        per_class.push(members);
    }
    let target = per_class.iter().map(Vec::len).min().unwrap_or(0);
    let mut keep: Vec<usize> = per_class
        .iter()
        .flat_map(|members| {
            index::sample(&mut rng, members.len(), target)
                .into_iter()
                .map(|j| members[j])
                .collect::<Vec<_>>()
        })
        .collect();
    keep.sort_unstable();
    Ok(Corpus::from_trusted(keep.into_iter().map(|i| corpus.reviews[i].clone()).collect()))
}

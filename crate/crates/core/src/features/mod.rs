//! Numeric representations of reviews: term vectors, surface statistics,
//! reviewer behaviour, lexicon percentages, scaling and embedding sequences.

mod embedding;
mod lexicon;
mod pipeline;
mod reviewer;
mod scaler;
mod structural;
mod vocab;

use thiserror::Error;

pub use embedding::{embed_sequence, EmbeddingTable};
pub use lexicon::{pos_percentages, sentiment_percentages, SentimentLexicon, TagLexicon, UNKNOWN_TAG};
pub use pipeline::{
    FittedPipeline, InputData, InputLayout, ModelInput, PipelineConfig, Representation, DEFAULT_MAX_LEN,
};
pub(crate) use pipeline::hex;
pub use reviewer::{build_reviewer_profiles, ReviewerProfile, REVIEWER_FEATURE_NAMES};
pub use scaler::FeatureScaler;
pub use structural::{structural_features, StructuralFeatures};
pub use vocab::{bow_counts, smoothed_idf, tfidf_vector, TermVector, Vocabulary};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("corpus produced no tokens")]
    EmptyVocabulary,
    #[error("cannot fit a scaler on zero rows")]
    EmptyFit,
    #[error("{}expected dimension {expected}, found {found}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    DimensionMismatch { line: Option<usize>, expected: usize, found: usize },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("terms in both sentiment lexicons: {0:?}")]
    LexiconConflict(Vec<String>),
    #[error("pipeline configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

/// Word representation followed by the (already scaled) user features.
pub fn concat_features(word_rep: &[f64], user_features: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(word_rep.len() + user_features.len());
    out.extend_from_slice(word_rep);
    out.extend_from_slice(user_features);
    out
}

//! Fitted feature pipeline: vocabulary/IDF, reviewer-feature scaler and an
//! optional embedding table, bound together under one schema id.

use std::collections::{BTreeMap, HashSet};
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    bow_counts, build_reviewer_profiles, embed_sequence, tfidf_vector, EmbeddingTable, FeatureError,
    FeatureScaler, Result, ReviewerProfile, TermVector, Vocabulary,
};
use crate::corpus::{tokenize, Review};
use crate::exec::{self, ExecMode};
use crate::tensor::Matrix;

pub const DEFAULT_MAX_LEN: usize = 320;
const USER_FEATURES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    #[default]
    Tfidf,
    Counts,
    Embeddings,
}

/// How a model consumes the word representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputLayout {
    /// One sparse vector over the vocabulary.
    Sparse,
    /// Token positions as vocabulary ids, for recurrent models over BoW.
    OneHotSequence,
    /// `max_len x D` embedding rows.
    DenseSequence,
}

fn default_max_len() -> usize {
    DEFAULT_MAX_LEN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub representation: Representation,
    #[serde(default)]
    pub max_terms: Option<usize>,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default)]
    pub user_features: bool,
    #[serde(default)]
    pub embeddings: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            representation: Representation::Tfidf,
            max_terms: None,
            max_len: DEFAULT_MAX_LEN,
            user_features: false,
            embeddings: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0 {
            return Err(FeatureError::Config("features.max_len: must be at least 1".into()));
        }
        if self.max_terms == Some(0) {
            return Err(FeatureError::Config("features.max_terms: must be at least 1".into()));
        }
        if self.representation == Representation::Embeddings && self.embeddings.is_none() {
            return Err(FeatureError::Config("features.embeddings: required for the embeddings representation".into()));
        }
        Ok(())
    }
}

/// Word representation as consumed by a model.
#[derive(Debug, Clone, PartialEq)]
pub enum InputData {
    Sparse(TermVector),
    Dense(Matrix),
    OneHot { ids: Vec<Option<usize>>, dim: usize },
}

/// One vectorized review: word representation plus scaled user features
/// (empty when the pipeline does not use them).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub main: InputData,
    pub aux: Vec<f64>,
}

impl ModelInput {
    pub fn sparse(v: TermVector) -> Self {
        ModelInput { main: InputData::Sparse(v), aux: Vec::new() }
    }

    pub fn dense(m: Matrix) -> Self {
        ModelInput { main: InputData::Dense(m), aux: Vec::new() }
    }

    pub fn with_aux(mut self, aux: Vec<f64>) -> Self {
        self.aux = aux;
        self
    }

    /// Sparse word vector with the user features appended, for linear models.
    pub fn joined_sparse(&self) -> Option<TermVector> {
        match &self.main {
            InputData::Sparse(v) => Some(v.extended(&self.aux)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EmbeddingRef {
    path: Option<PathBuf>,
    dim: usize,
    terms: usize,
}

/// Feature pipeline fitted on one training partition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FittedPipeline {
    config: PipelineConfig,
    layout: InputLayout,
    vocab: Option<Vocabulary>,
    scaler: Option<FeatureScaler>,
    embedding: Option<EmbeddingRef>,
    schema_id: String,
    #[serde(skip)]
    table: Option<Arc<EmbeddingTable>>,
}

impl PartialEq for FittedPipeline {
    fn eq(&self, other: &Self) -> bool {
        self.schema_id == other.schema_id
    }
}

impl FittedPipeline {
    /// Fit vocabulary, IDF and scaler on `train` only.
    pub fn fit(
        config: &PipelineConfig,
        layout: InputLayout,
        train: &[Review],
        embeddings: Option<Arc<EmbeddingTable>>,
    ) -> Result<Self> {
        config.validate()?;
        let uses_embeddings = config.representation == Representation::Embeddings;
        if uses_embeddings != (layout == InputLayout::DenseSequence) {
            return Err(FeatureError::Config(format!(
                "representation {:?} cannot feed a {:?} model input",
                config.representation, layout
            )));
        }
        let vocab = if uses_embeddings {
            None
        } else {
            let docs: Vec<Vec<String>> = train.iter().map(|r| tokenize(&r.text)).collect();
            Some(Vocabulary::from_documents(&docs, config.max_terms)?)
        };
        let (table, embedding) = if uses_embeddings {
            let table = embeddings
                .ok_or_else(|| FeatureError::Config("embedding table not loaded".into()))?;
            let r = EmbeddingRef { path: config.embeddings.clone(), dim: table.dim(), terms: table.len() };
            (Some(table), Some(r))
        } else {
            (None, None)
        };
        let scaler = if config.user_features {
            // resampled partitions repeat reviews; count each review once
            let mut seen = HashSet::new();
            let profiles = build_reviewer_profiles(train.iter().filter(|r| seen.insert(r.id.as_str())));
            let rows: Vec<[f64; USER_FEATURES]> = train
                .iter()
                .filter_map(|r| r.reviewer_id.as_ref().and_then(|id| profiles.get(id)))
                .map(ReviewerProfile::feature_vector)
                .collect();
            if rows.is_empty() {
                return Err(FeatureError::Config(
                    "user features requested but no training review carries a reviewer id".into(),
                ));
            }
            Some(FeatureScaler::fit(&rows)?)
        } else {
            None
        };
        let mut fitted = FittedPipeline {
            config: config.clone(),
            layout,
            vocab,
            scaler,
            embedding,
            schema_id: String::new(),
            table,
        };
        fitted.schema_id = fitted.compute_schema_id();
        Ok(fitted)
    }

    fn compute_schema_id(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&(&self.config, self.layout, &self.embedding)).unwrap_or_default());
        if let Some(v) = &self.vocab {
            for (i, t) in v.terms().iter().enumerate() {
                h.update(t.as_bytes());
                h.update([0]);
                h.update(v.idf(t).unwrap_or(0.0).to_le_bytes());
                h.update((i as u64).to_le_bytes());
            }
        }
        if let Some(s) = &self.scaler {
            h.update(serde_json::to_vec(s).unwrap_or_default());
        }
        hex(&h.finalize())
    }

    pub fn schema_id(&self) -> &str {
        &self.schema_id
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn layout(&self) -> InputLayout {
        self.layout
    }

    pub fn vocabulary(&self) -> Option<&Vocabulary> {
        self.vocab.as_ref()
    }

    pub fn uses_user_features(&self) -> bool {
        self.scaler.is_some()
    }

    pub fn user_feature_dim(&self) -> usize {
        if self.uses_user_features() {
            USER_FEATURES
        } else {
            0
        }
    }

    /// Width of the word representation: vocabulary size, or embedding
    /// dimension for dense sequences.
    pub fn word_dim(&self) -> usize {
        match (&self.vocab, &self.embedding) {
            (Some(v), _) => v.len(),
            (None, Some(e)) => e.dim,
            (None, None) => 0,
        }
    }

    pub fn max_len(&self) -> usize {
        self.config.max_len
    }

    /// Scale raw reviewer statistics. `None` gives the neutral all-zero
    /// vector; the flag reports whether that default was used.
    pub fn user_features_for(&self, raw: Option<[f64; USER_FEATURES]>) -> (Vec<f64>, bool) {
        match (&self.scaler, raw) {
            (None, _) => (Vec::new(), false),
            (Some(s), Some(raw)) => (s.apply(&raw), false),
            (Some(_), None) => (vec![0.0; USER_FEATURES], true),
        }
    }

    fn word_input(&self, text: &str) -> InputData {
        let tokens = tokenize(text);
        match (self.layout, &self.vocab) {
            (InputLayout::Sparse, Some(v)) => InputData::Sparse(match self.config.representation {
                Representation::Counts => bow_counts(&tokens, v),
                _ => tfidf_vector(&tokens, v),
            }),
            (InputLayout::OneHotSequence, Some(v)) => InputData::OneHot {
                ids: tokens.iter().take(self.config.max_len).map(|t| v.index_of(t)).collect(),
                dim: v.len(),
            },
            _ => {
                let table = self.table.as_deref().expect("embedding table attached");
                InputData::Dense(embed_sequence(&tokens, table, self.config.max_len))
            }
        }
    }

    /// Vectorize one text with optional raw reviewer statistics.
    pub fn transform_text(&self, text: &str, raw_user: Option<[f64; USER_FEATURES]>) -> (ModelInput, bool) {
        let (aux, defaulted) = self.user_features_for(raw_user);
        (ModelInput { main: self.word_input(text), aux }, defaulted)
    }

    /// Vectorize reviews, looking reviewer statistics up in `profiles`.
    pub fn transform(
        &self,
        reviews: &[Review],
        profiles: &BTreeMap<String, ReviewerProfile>,
        mode: ExecMode,
    ) -> Vec<ModelInput> {
        exec::map(mode, reviews, |r| {
            let raw = r.reviewer_id.as_ref().and_then(|id| profiles.get(id)).map(ReviewerProfile::feature_vector);
            self.transform_text(&r.text, raw).0
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline serializes")
    }

    /// Restore a saved pipeline. Embedding-based pipelines need their table
    /// supplied by the caller; its shape must match the one recorded at fit
    /// time.
    pub fn from_json(src: &str, embeddings: Option<Arc<EmbeddingTable>>) -> Result<Self> {
        let mut p: FittedPipeline =
            serde_json::from_str(src).map_err(|e| FeatureError::Config(format!("pipeline file: {e}")))?;
        p.vocab = p.vocab.map(Vocabulary::reindex);
        if let Some(r) = &p.embedding {
            let table = embeddings.ok_or_else(|| FeatureError::Config("pipeline needs its embedding table".into()))?;
            if table.dim() != r.dim || table.len() != r.terms {
                return Err(FeatureError::DimensionMismatch { line: None, expected: r.dim, found: table.dim() });
            }
            p.table = Some(table);
        }
        if p.compute_schema_id() != p.schema_id {
            return Err(FeatureError::Config("pipeline file schema id does not match its contents".into()));
        }
        Ok(p)
    }

    /// Embedding table path recorded in a saved pipeline, read without
    /// restoring the pipeline.
    pub fn embedding_path_in(src: &str) -> Result<Option<PathBuf>> {
        #[derive(Deserialize)]
        struct Probe {
            embedding: Option<EmbeddingRef>,
        }
        let probe: Probe = serde_json::from_str(src).map_err(|e| FeatureError::Config(format!("pipeline file: {e}")))?;
        Ok(probe.embedding.and_then(|e| e.path))
    }

    pub fn embedding_path(&self) -> Option<&PathBuf> {
        self.embedding.as_ref().and_then(|e| e.path.as_ref())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

//! Validation protocols: per-split pipeline fitting, training and scoring,
//! with accuracy, confusion and error-analysis aggregates.

mod metrics;
mod recipe;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{bootstrap_splits, stratified_kfold, Corpus, CorpusError, Label, Review, Split, SplitKind};
use crate::exec::{self, ExecMode};
use crate::features::{build_reviewer_profiles, EmbeddingTable, FeatureError, FittedPipeline, ReviewerProfile};
use crate::models::{train_model, write_model, Model, ModelError};

pub use metrics::{confusion_matrix, error_analysis, Confusion, ErrorStats};
pub use recipe::{ModelRecipe, TrainOverrides};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("recipe: {0}")]
    Recipe(String),
    #[error("{split}: {source}")]
    InSplit {
        split: String,
        #[source]
        source: Box<EvalError>,
    },
}

pub type Result<T> = std::result::Result<T, EvalError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolKind {
    KFold { k: usize },
    Bootstrap { repeats: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Protocol {
    #[serde(flatten)]
    pub kind: ProtocolKind,
    pub seed: u64,
}

impl Protocol {
    pub fn kfold(k: usize, seed: u64) -> Self {
        Protocol { kind: ProtocolKind::KFold { k }, seed }
    }

    pub fn bootstrap(repeats: usize, seed: u64) -> Self {
        Protocol { kind: ProtocolKind::Bootstrap { repeats }, seed }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ProtocolKind::KFold { k } if k < 2 => Err(EvalError::Recipe(format!("protocol.k: must be at least 2, got {k}"))),
            ProtocolKind::Bootstrap { repeats: 0 } => Err(EvalError::Recipe("protocol.repeats: must be at least 1".into())),
            _ => Ok(()),
        }
    }

    pub fn splits(&self, labels: &[Label]) -> Result<Vec<Split>> {
        self.validate()?;
        Ok(match self.kind {
            ProtocolKind::KFold { k } => stratified_kfold(labels, k, self.seed)?,
            ProtocolKind::Bootstrap { repeats } => bootstrap_splits(labels, repeats, self.seed)?,
        })
    }
}

/// Shared inputs that are expensive to load once per split.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub mode: ExecMode,
    pub embeddings: Option<Arc<EmbeddingTable>>,
}

impl RunOptions {
    pub fn sequential() -> Self {
        RunOptions { mode: ExecMode::Sequential, embeddings: None }
    }
}

/// Load the embedding table a recipe names, if any.
pub fn load_embeddings(recipe: &ModelRecipe) -> Result<Option<Arc<EmbeddingTable>>> {
    match &recipe.features.embeddings {
        Some(path) => Ok(Some(Arc::new(EmbeddingTable::load(path)?))),
        None => Ok(None),
    }
}

pub fn load_embeddings_from(path: Option<&Path>) -> Result<Option<Arc<EmbeddingTable>>> {
    path.map(|p| EmbeddingTable::load(p).map(Arc::new)).transpose().map_err(Into::into)
}

fn targets(reviews: &[Review]) -> Result<Vec<f64>> {
    reviews
        .iter()
        .map(|r| r.label.target().ok_or_else(|| EvalError::Shape(format!("review {} has no label", r.id))))
        .collect()
}

fn unique_profiles<'a>(reviews: impl IntoIterator<Item = &'a Review>) -> BTreeMap<String, ReviewerProfile> {
    let mut seen = HashSet::new();
    build_reviewer_profiles(reviews.into_iter().filter(|r| seen.insert(r.id.as_str())))
}

/// Fit a pipeline on `train` and train the recipe's model on it.
pub fn fit_recipe(
    train: &[Review],
    recipe: &ModelRecipe,
    seed: u64,
    opts: &RunOptions,
) -> Result<(FittedPipeline, Model)> {
    recipe.validate()?;
    let layout = recipe.model.input_layout(recipe.features.representation)?;
    let pipeline = FittedPipeline::fit(&recipe.features, layout, train, opts.embeddings.clone())?;
    let profiles = unique_profiles(train);
    let xs = pipeline.transform(train, &profiles, opts.mode);
    let ys = targets(train)?;
    let model = train_model(&recipe.model, &recipe.train_config(Some(seed)), &pipeline, &xs, &ys)?;
    Ok((pipeline, model))
}

/// Scores for `test` under a fitted pipeline. Reviewer statistics come from
/// the training partition plus the test reviews themselves, so only test
/// rows see test-side behaviour.
pub fn score_reviews(
    pipeline: &FittedPipeline,
    model: &Model,
    train: &[Review],
    test: &[Review],
    mode: ExecMode,
) -> Result<Vec<f64>> {
    let profiles = unique_profiles(train.iter().chain(test));
    let xs = pipeline.transform(test, &profiles, mode);
    Ok(model.predict_batch(&xs, mode)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub id: String,
    pub kind: SplitKind,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub confusion: Confusion,
    /// Pipeline schema id; depends on the training partition only.
    pub pipeline_fingerprint: String,
    /// SHA-256 of the serialized model.
    pub model_fingerprint: String,
    pub test_ids: Vec<String>,
    pub p_deceptive: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub protocol: Protocol,
    pub recipe: ModelRecipe,
    pub n_reviews: usize,
    pub per_split_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub confusion: Confusion,
    pub error_stats: ErrorStats,
    pub splits: Vec<SplitReport>,
}

/// Mix the run seed with a split index so each split trains from its own
/// stream regardless of execution order.
fn split_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn run_split(corpus: &Corpus, recipe: &ModelRecipe, seed: u64, split: &Split, opts: &RunOptions) -> Result<SplitReport> {
    let train = corpus.select(&split.train_idx);
    let test = corpus.select(&split.test_idx);
    let (pipeline, model) = fit_recipe(&train, recipe, seed, opts)?;
    let p = score_reviews(&pipeline, &model, &train, &test, opts.mode)?;
    let predicted: Vec<Label> = p.iter().map(|&p| Label::from_probability(p)).collect();
    let gold: Vec<Label> = test.iter().map(|r| r.label).collect();
    let confusion = confusion_matrix(&predicted, &gold)?;
    Ok(SplitReport {
        id: split.id(),
        kind: split.kind,
        n_train: train.len(),
        n_test: test.len(),
        accuracy: confusion.accuracy(),
        confusion,
        pipeline_fingerprint: pipeline.schema_id().to_owned(),
        model_fingerprint: crate::features::hex(&Sha256::digest(write_model(&model))),
        test_ids: test.iter().map(|r| r.id.clone()).collect(),
        p_deceptive: p,
    })
}

/// Run `recipe` under `protocol`. Splits run through [`exec::map`] and are
/// merged in split order, so the report does not depend on the execution
/// mode.
pub fn run_protocol(corpus: &Corpus, recipe: &ModelRecipe, protocol: &Protocol, opts: &RunOptions) -> Result<EvalReport> {
    recipe.validate()?;
    let labels = corpus.labels();
    if labels.contains(&Label::Unknown) {
        return Err(EvalError::Shape("evaluation needs every review labelled".into()));
    }
    let splits = protocol.splits(&labels)?;
    let seed = recipe.train_config(None).seed ^ protocol.seed;
    info!("running {} splits of {:?}", splits.len(), protocol.kind);
    // splits fan out; work inside a split stays sequential
    let inner = RunOptions { mode: ExecMode::Sequential, embeddings: opts.embeddings.clone() };
    let indexed: Vec<(usize, &Split)> = splits.iter().enumerate().collect();
    let results = exec::map(opts.mode, &indexed, |&(i, split)| {
        run_split(corpus, recipe, split_seed(seed, i), split, &inner)
            .map_err(|e| EvalError::InSplit { split: split.id(), source: Box::new(e) })
    });
    let reports: Vec<SplitReport> = results.into_iter().collect::<Result<_>>()?;

    let mut confusion = Confusion::default();
    let mut predicted = Vec::new();
    let mut gold = Vec::new();
    let mut tested: Vec<&Review> = Vec::new();
    for (r, split) in reports.iter().zip(&splits) {
        confusion.add(&r.confusion);
        for (&i, &p) in split.test_idx.iter().zip(&r.p_deceptive) {
            predicted.push(Label::from_probability(p));
            gold.push(labels[i]);
            tested.push(&corpus.reviews()[i]);
        }
    }
    let per_split_accuracy: Vec<f64> = reports.iter().map(|r| r.accuracy).collect();
    let mean_accuracy = per_split_accuracy.iter().sum::<f64>() / per_split_accuracy.len() as f64;
    Ok(EvalReport {
        protocol: *protocol,
        recipe: recipe.clone(),
        n_reviews: corpus.len(),
        per_split_accuracy,
        mean_accuracy,
        confusion,
        error_stats: error_analysis(&predicted, &gold, &tested)?,
        splits: reports,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// SHA-256 of the JSON record.
    pub fn digest(&self) -> String {
        crate::features::hex(&Sha256::digest(self.to_json().as_bytes()))
    }

    /// Plain-text summary table.
    pub fn table(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>7} {:>6} {:>9}", "split", "train", "test", "accuracy");
        for s in &self.splits {
            let _ = writeln!(out, "{:<14} {:>7} {:>6} {:>9.4}", s.id, s.n_train, s.n_test, s.accuracy);
        }
        let _ = writeln!(out, "{:<14} {:>7} {:>6} {:>9.4}", "mean", "", "", self.mean_accuracy);
        let c = &self.confusion;
        let _ = writeln!(out, "confusion (deceptive positive): tp {} fp {} tn {} fn {}", c.tp, c.fp, c.tn, c.fn_);
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.2}"));
        let e = &self.error_stats;
        let _ = writeln!(out, "{:<22} {:>9} {:>9}", "", "correct", "incorrect");
        let rows = [
            ("words per sentence", e.avg_words_per_sentence_correct, e.avg_words_per_sentence_incorrect),
            ("words per review", e.avg_review_words_correct, e.avg_review_words_incorrect),
            ("word length (chars)", e.avg_word_length_correct, e.avg_word_length_incorrect),
        ];
        for (name, a, b) in rows {
            let _ = writeln!(out, "{name:<22} {:>9} {:>9}", fmt(a), fmt(b));
        }
        out
    }
}

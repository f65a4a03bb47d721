//! Classifiers: linear baselines and small neural networks, trained from
//! scratch on [`ModelInput`]s produced by a fitted feature pipeline.

mod gradcheck;
mod io;
mod linear;
pub mod nn;
mod spec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::features::{FittedPipeline, InputLayout, ModelInput, Vocabulary};
use nn::{fit_network, sigmoid, Network, Shape, TrainHistory};

pub use gradcheck::{gradient_check, random_trial, GradCheck};
pub use io::{load_model, read_model, save_model, write_model, FORMAT_VERSION, MAGIC};
pub use linear::{explain_linear, fit_platt, train_linear_svm, train_logistic_regression, Contribution, LinearModel};
pub use spec::{CnnMode, ModelKind, ModelSpec, Pooling, TrainConfig};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training diverged at epoch {epoch}; try a lower learning rate")]
    Divergence { epoch: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("input does not match the model's feature schema: {0}")]
    Schema(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("model file format version {found} is not supported (expected {expected})")]
    Version { found: u16, expected: u16 },
    #[error("corrupt model file: {0}")]
    Format(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TrainedModel {
    Linear(LinearModel),
    Neural(Network),
    /// Constant prediction: the training share of deceptive reviews.
    Majority { p_deceptive: f64 },
}

/// A trained classifier bound to the feature schema it was fitted against.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub train: TrainConfig,
    pub schema_id: String,
    pub input: Shape,
    pub aux_width: usize,
    pub body: TrainedModel,
    pub history: Option<TrainHistory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub p_deceptive: f64,
    pub label: Label,
    /// Per-feature contributions for linear models when requested.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contributions: Option<Vec<Contribution>>,
}

/// Input shape a pipeline produces for its layout.
pub fn input_shape(pipeline: &FittedPipeline) -> Shape {
    match pipeline.layout() {
        InputLayout::Sparse => Shape::Sparse(pipeline.word_dim()),
        InputLayout::OneHotSequence => Shape::OneHot(0, pipeline.word_dim()),
        InputLayout::DenseSequence => Shape::Dense(pipeline.max_len(), pipeline.word_dim()),
    }
}

fn joined(xs: &[ModelInput]) -> Result<Vec<crate::features::TermVector>> {
    xs.iter()
        .map(|x| x.joined_sparse().ok_or_else(|| ModelError::Unsupported("linear models need sparse input".into())))
        .collect()
}

/// Train `spec` on vectorized inputs from `pipeline` with 0/1 targets
/// (1 = deceptive).
pub fn train_model(
    spec: &ModelSpec,
    cfg: &TrainConfig,
    pipeline: &FittedPipeline,
    xs: &[ModelInput],
    ys: &[f64],
) -> Result<Model> {
    spec.validate()?;
    cfg.validate()?;
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(ModelError::Shape(format!("{} inputs vs {} targets", xs.len(), ys.len())));
    }
    let expected = spec.input_layout(pipeline.config().representation)?;
    if expected != pipeline.layout() {
        return Err(ModelError::Schema(format!(
            "{} expects {expected:?} input, pipeline produces {:?}",
            spec.kind(),
            pipeline.layout()
        )));
    }
    let input = input_shape(pipeline);
    let aux_width = pipeline.user_feature_dim();
    let mut history = None;
    let body = match spec {
        ModelSpec::Majority => {
            let pos = ys.iter().filter(|&&y| y >= 0.5).count() as f64;
            TrainedModel::Majority { p_deceptive: pos / ys.len() as f64 }
        }
        ModelSpec::LogisticRegression => TrainedModel::Linear(train_logistic_regression(&joined(xs)?, ys, cfg)?),
        ModelSpec::LinearSvm => TrainedModel::Linear(train_linear_svm(&joined(xs)?, ys, cfg)?),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut net = spec.build_network(input, aux_width, &mut rng)?;
            history = Some(fit_network(&mut net, xs, ys, cfg)?);
            TrainedModel::Neural(net)
        }
    };
    Ok(Model {
        spec: spec.clone(),
        train: cfg.clone(),
        schema_id: pipeline.schema_id().to_owned(),
        input,
        aux_width,
        body,
        history,
    })
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    /// Reject inputs whose layout or width differs from training.
    pub fn check_input(&self, x: &ModelInput) -> Result<()> {
        let actual = nn::input_shape_of(x);
        if !self.input.accepts(actual) || x.aux.len() != self.aux_width {
            return Err(ModelError::Schema(format!(
                "model expects {:?} with {} user features, got {:?} with {}",
                self.input,
                self.aux_width,
                actual,
                x.aux.len()
            )));
        }
        Ok(())
    }

    pub fn check_pipeline(&self, pipeline: &FittedPipeline) -> Result<()> {
        if pipeline.schema_id() != self.schema_id {
            return Err(ModelError::Schema(format!(
                "model was trained against schema {}, pipeline is {}",
                short(&self.schema_id),
                short(pipeline.schema_id())
            )));
        }
        Ok(())
    }

    pub fn probability(&self, x: &ModelInput) -> Result<f64> {
        self.check_input(x)?;
        let p = match &self.body {
            TrainedModel::Majority { p_deceptive } => *p_deceptive,
            TrainedModel::Linear(m) => m.probability(&joined(std::slice::from_ref(x))?[0]),
            TrainedModel::Neural(net) => sigmoid(net.logit(x)?),
        };
        if !p.is_finite() {
            return Err(ModelError::Divergence { epoch: 0 });
        }
        Ok(p)
    }

    /// Probability and label; `explain` adds ranked contributions for
    /// linear models.
    pub fn predict(&self, x: &ModelInput, explain: Option<&Vocabulary>) -> Result<Prediction> {
        let p = self.probability(x)?;
        let contributions = match (&self.body, explain) {
            (TrainedModel::Linear(m), Some(vocab)) => {
                Some(explain_linear(m, &joined(std::slice::from_ref(x))?[0], Some(vocab)))
            }
            _ => None,
        };
        Ok(Prediction { p_deceptive: p, label: Label::from_probability(p), contributions })
    }

    /// Ranked per-feature contributions; linear models only.
    pub fn explain(&self, x: &ModelInput, vocab: Option<&Vocabulary>) -> Result<Vec<Contribution>> {
        self.check_input(x)?;
        match &self.body {
            TrainedModel::Linear(m) => Ok(explain_linear(m, &joined(std::slice::from_ref(x))?[0], vocab)),
            _ => Err(ModelError::Unsupported(format!("{} models have no per-term explanation", self.kind()))),
        }
    }

    pub fn predict_batch(&self, xs: &[ModelInput], mode: crate::ExecMode) -> Result<Vec<f64>> {
        crate::exec::map(mode, xs, |x| self.probability(x)).into_iter().collect()
    }
}

fn short(id: &str) -> &str {
    &id[..id.len().min(12)]
}

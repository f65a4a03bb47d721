//! Declarative model and training configuration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nn::{Conv1d, Dense, Layer, Lstm, Network, Shape};
use super::{ModelError, Result};
use crate::features::{InputLayout, Representation};

fn ffnn_hidden() -> [usize; 2] {
    [32, 16]
}
fn ffnn_dropout() -> f64 {
    0.25
}
fn cnn_filters() -> usize {
    50
}
fn cnn_kernel() -> usize {
    10
}
fn cnn_dropout() -> f64 {
    0.5
}
fn head_dense() -> [usize; 2] {
    [8, 8]
}
fn lstm_units() -> usize {
    10
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnnMode {
    /// Kernel slides along the vocabulary axis of a single BoW vector.
    Bow,
    /// Kernel spans the full embedding width and slides along the word axis.
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    /// Non-overlapping windows along the sliding axis.
    Window(usize),
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    LogisticRegression,
    LinearSvm,
    /// Predicts the training-set class frequency for every input.
    Majority,
    Ffnn {
        #[serde(default = "ffnn_hidden")]
        hidden: [usize; 2],
        #[serde(default = "ffnn_dropout")]
        dropout: f64,
    },
    Cnn {
        mode: CnnMode,
        #[serde(default = "cnn_filters")]
        filters: usize,
        #[serde(default = "cnn_kernel")]
        kernel: usize,
        /// Defaults to a window of 10 for BoW input and 5 for embeddings.
        #[serde(default)]
        pool: Option<Pooling>,
        #[serde(default = "cnn_dropout")]
        dropout: f64,
        #[serde(default = "head_dense")]
        dense: [usize; 2],
    },
    Lstm {
        #[serde(default = "lstm_units")]
        units: usize,
        #[serde(default = "head_dense")]
        dense: [usize; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LogisticRegression,
    LinearSvm,
    Majority,
    Ffnn,
    CnnBow,
    CnnEmbedding,
    Lstm,
}

impl ModelKind {
    pub fn is_linear(self) -> bool {
        matches!(self, ModelKind::LogisticRegression | ModelKind::LinearSvm)
    }

    pub fn code(self) -> u8 {
        match self {
            ModelKind::LogisticRegression => 1,
            ModelKind::LinearSvm => 2,
            ModelKind::Majority => 3,
            ModelKind::Ffnn => 4,
            ModelKind::CnnBow => 5,
            ModelKind::CnnEmbedding => 6,
            ModelKind::Lstm => 7,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        f.write_str(&s)
    }
}

impl ModelSpec {
    /// FFNN sized for the small hotel corpus: 32 and 16 hidden units.
    pub fn ffnn_small_corpus() -> Self {
        ModelSpec::Ffnn { hidden: [32, 16], dropout: 0.25 }
    }

    /// FFNN sized for the large review corpus: 16 and 8 hidden units.
    pub fn ffnn_large_corpus() -> Self {
        ModelSpec::Ffnn { hidden: [16, 8], dropout: 0.25 }
    }

    /// CNN with windowed pooling (1x10 over BoW, 5x1 over embeddings).
    pub fn cnn_windowed(mode: CnnMode) -> Self {
        ModelSpec::Cnn { mode, filters: 50, kernel: 10, pool: None, dropout: 0.5, dense: [8, 8] }
    }

    /// CNN with global max pooling.
    pub fn cnn_global(mode: CnnMode) -> Self {
        ModelSpec::Cnn { mode, filters: 50, kernel: 10, pool: Some(Pooling::Global), dropout: 0.5, dense: [8, 8] }
    }

    pub fn lstm() -> Self {
        ModelSpec::Lstm { units: 10, dense: [8, 8] }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::LogisticRegression => ModelKind::LogisticRegression,
            ModelSpec::LinearSvm => ModelKind::LinearSvm,
            ModelSpec::Majority => ModelKind::Majority,
            ModelSpec::Ffnn { .. } => ModelKind::Ffnn,
            ModelSpec::Cnn { mode: CnnMode::Bow, .. } => ModelKind::CnnBow,
            ModelSpec::Cnn { mode: CnnMode::Embedding, .. } => ModelKind::CnnEmbedding,
            ModelSpec::Lstm { .. } => ModelKind::Lstm,
        }
    }

    /// Input layout this model needs from a pipeline with `repr`.
    pub fn input_layout(&self, repr: Representation) -> Result<InputLayout> {
        let embeddings = repr == Representation::Embeddings;
        let layout = match self {
            ModelSpec::LogisticRegression | ModelSpec::LinearSvm | ModelSpec::Majority if embeddings => {
                return Err(ModelError::InvalidConfig(
                    "model: linear models take tfidf or counts features, not embeddings".into(),
                ))
            }
            ModelSpec::LogisticRegression | ModelSpec::LinearSvm | ModelSpec::Majority => InputLayout::Sparse,
            ModelSpec::Cnn { mode: CnnMode::Bow, .. } if embeddings => {
                return Err(ModelError::InvalidConfig("model.mode: bow CNN needs tfidf or counts features".into()))
            }
            ModelSpec::Cnn { mode: CnnMode::Embedding, .. } if !embeddings => {
                return Err(ModelError::InvalidConfig("model.mode: embedding CNN needs embeddings features".into()))
            }
            ModelSpec::Lstm { .. } if !embeddings => InputLayout::OneHotSequence,
            _ if embeddings => InputLayout::DenseSequence,
            _ => InputLayout::Sparse,
        };
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        match self {
            ModelSpec::Ffnn { hidden, dropout } => {
                if hidden.contains(&0) {
                    return bad("model.hidden: layer sizes must be positive".into());
                }
                if !(0.0..1.0).contains(dropout) {
                    return bad(format!("model.dropout: {dropout} outside [0, 1)"));
                }
            }
            ModelSpec::Cnn { filters, kernel, pool, dropout, dense, .. } => {
                if *filters == 0 || *kernel == 0 || dense.contains(&0) {
                    return bad("model: filters, kernel and dense sizes must be positive".into());
                }
                if matches!(pool, Some(Pooling::Window(0))) {
                    return bad("model.pool: window must be positive".into());
                }
                if !(0.0..1.0).contains(dropout) {
                    return bad(format!("model.dropout: {dropout} outside [0, 1)"));
                }
            }
            ModelSpec::Lstm { units, dense } if *units == 0 || dense.contains(&0) => {
                return bad("model: units and dense sizes must be positive".into());
            }
            _ => {}
        }
        Ok(())
    }

    /// Lay out the network for a neural spec. `input` is the word
    /// representation shape; `aux` the number of user features.
    pub fn build_network<R: Rng>(&self, input: Shape, aux: usize, rng: &mut R) -> Result<Network> {
        self.validate()?;
        let mut layers = Vec::new();
        let mut shape = input;
        let push = |layer: Layer, layers: &mut Vec<Layer>, shape: &mut Shape| -> Result<()> {
            *shape = layer.output_shape(*shape)?;
            layers.push(layer);
            Ok(())
        };
        let width = |s: Shape| match s {
            Shape::Sparse(n) | Shape::Dense(1, n) => n,
            Shape::Dense(r, c) => r * c,
            Shape::OneHot(_, d) => d,
        };
        let head = |sizes: [usize; 2], layers: &mut Vec<Layer>, shape: &mut Shape, rng: &mut R| -> Result<()> {
            for units in sizes {
                let dense = Dense::new(rng, width(*shape), units, true);
                push(Layer::Dense(dense), layers, shape)?;
                push(Layer::Relu, layers, shape)?;
            }
            Ok(())
        };
        match self {
            ModelSpec::Ffnn { hidden, dropout } => {
                if let Shape::Dense(r, _) = shape {
                    if r > 1 {
                        push(Layer::Flatten, &mut layers, &mut shape)?;
                    }
                }
                if aux > 0 {
                    push(Layer::ConcatAux { width: aux }, &mut layers, &mut shape)?;
                }
                push(Layer::Dense(Dense::new(rng, width(shape), hidden[0], true)), &mut layers, &mut shape)?;
                push(Layer::Relu, &mut layers, &mut shape)?;
                push(Layer::Dropout { rate: *dropout }, &mut layers, &mut shape)?;
                push(Layer::Dense(Dense::new(rng, width(shape), hidden[1], true)), &mut layers, &mut shape)?;
                push(Layer::Relu, &mut layers, &mut shape)?;
            }
            ModelSpec::Cnn { mode, filters, kernel, pool, dropout, dense } => {
                let channels = match (mode, shape) {
                    (CnnMode::Bow, Shape::Sparse(_)) => 1,
                    (CnnMode::Embedding, Shape::Dense(_, d)) => d,
                    _ => return Err(ModelError::Shape(format!("{mode:?} CNN cannot take {shape:?}"))),
                };
                push(Layer::Conv1d(Conv1d::new(rng, channels, *kernel, *filters)), &mut layers, &mut shape)?;
                push(Layer::Relu, &mut layers, &mut shape)?;
                let pool = pool.unwrap_or(match mode {
                    CnnMode::Bow => Pooling::Window(10),
                    CnnMode::Embedding => Pooling::Window(5),
                });
                let pool_layer = match pool {
                    Pooling::Window(size) => Layer::MaxPool { size },
                    Pooling::Global => Layer::GlobalMaxPool,
                };
                push(pool_layer, &mut layers, &mut shape)?;
                push(Layer::Dropout { rate: *dropout }, &mut layers, &mut shape)?;
                push(Layer::Flatten, &mut layers, &mut shape)?;
                if aux > 0 {
                    push(Layer::ConcatAux { width: aux }, &mut layers, &mut shape)?;
                }
                head(*dense, &mut layers, &mut shape, rng)?;
            }
            ModelSpec::Lstm { units, dense } => {
                let inputs = match shape {
                    Shape::Dense(_, d) | Shape::OneHot(_, d) => d,
                    Shape::Sparse(_) => return Err(ModelError::Shape("LSTM needs a sequence input".into())),
                };
                push(Layer::Lstm(Lstm::new(rng, inputs, *units)), &mut layers, &mut shape)?;
                if aux > 0 {
                    push(Layer::ConcatAux { width: aux }, &mut layers, &mut shape)?;
                }
                head(*dense, &mut layers, &mut shape, rng)?;
            }
            _ => return Err(ModelError::Unsupported(format!("{:?} is not a neural model", self.kind()))),
        }
        let out = Dense::new(rng, width(shape), 1, false);
        push(Layer::Dense(out), &mut layers, &mut shape)?;
        let net = Network { input, aux_width: aux, layers };
        net.validate()?;
        Ok(net)
    }
}

/// Optimisation settings shared by every model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub validation_fraction: f64,
}

impl TrainConfig {
    /// Plain mini-batch gradient descent settings for the linear models.
    pub fn linear() -> Self {
        TrainConfig {
            seed: 0,
            learning_rate: 1.0,
            l2_lambda: 1e-4,
            batch_size: 32,
            max_epochs: 100,
            early_stop_patience: 6,
            validation_fraction: 0.1,
        }
    }

    /// Adam settings for the neural models.
    pub fn neural() -> Self {
        TrainConfig {
            seed: 0,
            learning_rate: 1e-3,
            l2_lambda: 1e-4,
            batch_size: 32,
            max_epochs: 50,
            early_stop_patience: 6,
            validation_fraction: 0.1,
        }
    }

    pub fn for_model(spec: &ModelSpec) -> Self {
        match spec {
            ModelSpec::LinearSvm => TrainConfig { l2_lambda: 1e-3, max_epochs: 60, ..Self::linear() },
            ModelSpec::LogisticRegression | ModelSpec::Majority => Self::linear(),
            _ => Self::neural(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ModelError::InvalidConfig(m.to_owned()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("train.learning_rate: must be positive");
        }
        if !(self.l2_lambda >= 0.0 && self.l2_lambda.is_finite()) {
            return bad("train.l2_lambda: must be non-negative");
        }
        if self.batch_size == 0 {
            return bad("train.batch_size: must be positive");
        }
        if self.max_epochs == 0 {
            return bad("train.max_epochs: must be positive");
        }
        if self.early_stop_patience == 0 {
            return bad("train.early_stop_patience: must be at least 1");
        }
        if !(self.validation_fraction >= 0.0 && self.validation_fraction < 1.0) {
            return bad("train.validation_fraction: must be in [0, 1)");
        }
        Ok(())
    }
}

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};
use crate::features::PipelineConfig;
use crate::models::{ModelSpec, TrainConfig};

/// Training settings a recipe may override; unset fields take the model
/// family's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2_lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop_patience: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation_fraction: Option<f64>,
}

/// Everything needed to train one model: architecture, feature pipeline and
/// optimisation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecipe {
    pub model: ModelSpec,
    #[serde(default)]
    pub features: PipelineConfig,
    #[serde(default)]
    pub train: TrainOverrides,
}

impl ModelRecipe {
    pub fn new(model: ModelSpec, features: PipelineConfig) -> Self {
        ModelRecipe { model, features, train: TrainOverrides::default() }
    }

    /// Resolved training configuration. A `seed` argument wins over the
    /// recipe's own seed.
    pub fn train_config(&self, seed: Option<u64>) -> TrainConfig {
        let o = &self.train;
        let base = TrainConfig::for_model(&self.model);
        TrainConfig {
            seed: seed.or(o.seed).unwrap_or(base.seed),
            learning_rate: o.learning_rate.unwrap_or(base.learning_rate),
            l2_lambda: o.l2_lambda.unwrap_or(base.l2_lambda),
            batch_size: o.batch_size.unwrap_or(base.batch_size),
            max_epochs: o.max_epochs.unwrap_or(base.max_epochs),
            early_stop_patience: o.early_stop_patience.unwrap_or(base.early_stop_patience),
            validation_fraction: o.validation_fraction.unwrap_or(base.validation_fraction),
        }
    }

    /// Check every section; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.features.validate()?;
        self.train_config(None).validate()?;
        self.model.input_layout(self.features.representation)?;
        Ok(())
    }

    pub fn from_json(src: &str) -> Result<Self> {
        let recipe: ModelRecipe = serde_json::from_str(src).map_err(|e| EvalError::Recipe(e.to_string()))?;
        recipe.validate()?;
        Ok(recipe)
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::BadgeThresholds;
use crate::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProviderConfig {
    /// `<dir>/<business_id>.jsonl` in the review record format.
    Local { dir: PathBuf },
}

impl Default for ProviderConfig {
    fn default() -> Self {
        ProviderConfig::Local { dir: PathBuf::from("businesses") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub model_dir: PathBuf,
    /// Falls back to the first bundle by name.
    pub default_model: Option<String>,
    pub badges: BadgeThresholds,
    pub provider: ProviderConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:8080".into(),
            model_dir: PathBuf::from("models"),
            default_model: None,
            badges: BadgeThresholds::default(),
            provider: ProviderConfig::default(),
        }
    }
}

impl ServiceConfig {
    pub fn from_toml(src: &str) -> Result<Self, ServiceError> {
        toml::from_str(src).map_err(|e| ServiceError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let src = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&src)
    }

    /// Apply `SPAMLENS_*` environment overrides.
    pub fn with_env(self) -> Result<Self, ServiceError> {
        self.with_vars(|k| std::env::var(k).ok())
    }

    pub fn with_vars(mut self, var: impl Fn(&str) -> Option<String>) -> Result<Self, ServiceError> {
        if let Some(v) = var("SPAMLENS_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = var("SPAMLENS_MODEL_DIR") {
            self.model_dir = v.into();
        }
        if let Some(v) = var("SPAMLENS_DEFAULT_MODEL") {
            self.default_model = Some(v);
        }
        if let Some(v) = var("SPAMLENS_PROVIDER_DIR") {
            self.provider = ProviderConfig::Local { dir: v.into() };
        }
        let num = |key: &str| -> Result<Option<f64>, ServiceError> {
            var(key)
                .map(|v| v.parse::<f64>().map_err(|_| ServiceError::Config(format!("{key}: not a number: {v:?}"))))
                .transpose()
        };
        if let Some(v) = num("SPAMLENS_BADGE_DAILY_VOLUME")? {
            self.badges.max_reviews_one_day = v;
        }
        if let Some(v) = num("SPAMLENS_BADGE_AVG_LENGTH")? {
            self.badges.avg_review_length_chars = v;
        }
        if let Some(v) = num("SPAMLENS_BADGE_RATING_STDDEV")? {
            self.badges.rating_stddev = v;
        }
        Ok(self)
    }
}

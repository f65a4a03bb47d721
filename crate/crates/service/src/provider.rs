use std::path::PathBuf;

use spamlens_core::corpus::{read_records, Review};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("{provider}: business {business_id:?} not found")]
    NotFound { provider: String, business_id: String },
    #[error("{provider}: invalid business id {id:?}")]
    BadId { provider: String, id: String },
    #[error("{provider}: {message}")]
    Upstream { provider: String, message: String },
}

/// Source of a business's reviews.
pub trait ReviewProvider: Send + Sync {
    fn name(&self) -> &str;
    fn reviews(&self, business_id: &str) -> Result<Vec<Review>, ProviderError>;
}

/// Reads `<dir>/<business_id>.jsonl` in the review record format.
#[derive(Debug, Clone)]
pub struct LocalFileProvider {
    dir: PathBuf,
}

impl LocalFileProvider {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        LocalFileProvider { dir: dir.into() }
    }
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_'))
}

impl ReviewProvider for LocalFileProvider {
    fn name(&self) -> &str {
        "local"
    }

    fn reviews(&self, business_id: &str) -> Result<Vec<Review>, ProviderError> {
        if !valid_id(business_id) {
            return Err(ProviderError::BadId { provider: self.name().into(), id: business_id.into() });
        }
        let path = self.dir.join(format!("{business_id}.jsonl"));
        let file = std::fs::File::open(&path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                ProviderError::NotFound { provider: self.name().into(), business_id: business_id.into() }
            }
            _ => ProviderError::Upstream { provider: self.name().into(), message: format!("{}: {e}", path.display()) },
        })?;
        let corpus = read_records(std::io::BufReader::new(file))
            .map_err(|e| ProviderError::Upstream { provider: self.name().into(), message: format!("{}: {e}", path.display()) })?;
        Ok(corpus.into_reviews())
    }
}

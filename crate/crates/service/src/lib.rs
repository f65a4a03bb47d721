//! HTTP API serving trained spamlens models.
//!
//! Endpoints:
//! - `POST /api/v1/score` scores one review text.
//! - `POST /api/v1/business/analyze` scores every review of a business.
//! - `GET /api/v1/models` lists loaded models.
//! - `GET /healthz` is a liveness probe.

pub mod analysis;
pub mod api;
pub mod config;
pub mod provider;
pub mod registry;

use std::sync::Arc;

use log::info;
use thiserror::Error;

pub use api::{router, AppState};
pub use config::{ProviderConfig, ServiceConfig};
pub use registry::{Registry, RegistryError, Snapshot};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Build application state from a config: load every model bundle and the
/// review provider.
pub fn state_from_config(config: &ServiceConfig) -> Result<AppState, ServiceError> {
    let snapshot = Snapshot::load_dir(&config.model_dir, config.default_model.clone())?;
    info!("loaded {} model(s) from {}", snapshot.names().len(), config.model_dir.display());
    let provider: Arc<dyn provider::ReviewProvider> = match &config.provider {
        ProviderConfig::Local { dir } => Arc::new(provider::LocalFileProvider::new(dir.clone())),
    };
    Ok(AppState::new(Arc::new(Registry::new(snapshot)), provider, config.badges))
}

/// Serve until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = state_from_config(&config)?;
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

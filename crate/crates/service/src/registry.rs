use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use log::info;
use spamlens_core::artifact::{list_bundles, ArtifactError, ModelBundle};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("unknown model {name:?}; available: {}", available.join(", "))]
    UnknownModel { name: String, available: Vec<String> },
    #[error("no models loaded")]
    Empty,
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

/// Immutable set of loaded models. Requests hold an `Arc` to the snapshot
/// they started with, so a swap never affects work in flight.
#[derive(Debug, Default)]
pub struct Snapshot {
    models: BTreeMap<String, Arc<ModelBundle>>,
    default: Option<String>,
}

impl Snapshot {
    pub fn new(bundles: Vec<ModelBundle>, default: Option<String>) -> Result<Self, RegistryError> {
        let models: BTreeMap<String, Arc<ModelBundle>> =
            bundles.into_iter().map(|b| (b.meta.name.clone(), Arc::new(b))).collect();
        let default = match default {
            Some(name) if !models.contains_key(&name) => {
                return Err(RegistryError::UnknownModel { name, available: models.keys().cloned().collect() })
            }
            Some(name) => Some(name),
            None => models.keys().next().cloned(),
        };
        Ok(Snapshot { models, default })
    }

    /// Load every bundle in `dir`.
    pub fn load_dir(dir: &Path, default: Option<String>) -> Result<Self, RegistryError> {
        let mut bundles = Vec::new();
        for name in list_bundles(dir)? {
            info!("loading model {name}");
            bundles.push(ModelBundle::load(dir, &name)?);
        }
        Self::new(bundles, default)
    }

    pub fn names(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    pub fn default_name(&self) -> Option<&str> {
        self.default.as_deref()
    }

    pub fn bundles(&self) -> impl Iterator<Item = &Arc<ModelBundle>> {
        self.models.values()
    }

    /// Look a model up by name, or the default when `name` is `None`.
    pub fn get(&self, name: Option<&str>) -> Result<Arc<ModelBundle>, RegistryError> {
        let name = match name.or(self.default.as_deref()) {
            Some(n) => n,
            None => return Err(RegistryError::Empty),
        };
        self.models
            .get(name)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownModel { name: name.to_owned(), available: self.names() })
    }
}

/// Shared registry whose snapshot can be replaced atomically.
#[derive(Debug, Default)]
pub struct Registry {
    current: RwLock<Arc<Snapshot>>,
}

impl Registry {
    pub fn new(snapshot: Snapshot) -> Self {
        Registry { current: RwLock::new(Arc::new(snapshot)) }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Swap in a new snapshot, returning the previous one.
    pub fn replace(&self, next: Snapshot) -> Arc<Snapshot> {
        let mut guard = self.current.write().unwrap_or_else(|e| e.into_inner());
        std::mem::replace(&mut *guard, Arc::new(next))
    }
}

//! Deployable model bundles: a model file, its fitted pipeline and a small
//! metadata record, stored side by side as `<name>.model`,
//! `<name>.pipeline.json` and `<name>.meta.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::load_embeddings_from;
use crate::features::{FeatureError, FittedPipeline};
use crate::models::{load_model, save_model, Model, ModelError, ModelKind};

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {source}")]
    Model {
        path: PathBuf,
        #[source]
        source: ModelError,
    },
    #[error("{path}: {source}")]
    Pipeline {
        path: PathBuf,
        #[source]
        source: FeatureError,
    },
    #[error("{path}: {message}")]
    Meta { path: PathBuf, message: String },
    #[error("bundle {0}: model and pipeline were not fitted together")]
    SchemaMismatch(String),
    #[error("invalid bundle name {0:?}")]
    BadName(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BundleMeta {
    pub name: String,
    pub kind: Option<ModelKind>,
    /// Description of the training data, typically the corpus path.
    pub trained_on: Option<String>,
    /// Path of an evaluation report for this recipe, if one was produced.
    pub accuracy_report_ref: Option<String>,
    pub corpus_sha256: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub meta: BundleMeta,
    pub model: Model,
    pub pipeline: FittedPipeline,
}

pub const MODEL_EXT: &str = "model";

/// Bundle names become file names, so they are restricted to a safe set.
pub fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 128
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

pub fn bundle_paths(dir: &Path, name: &str) -> [PathBuf; 3] {
    [
        dir.join(format!("{name}.{MODEL_EXT}")),
        dir.join(format!("{name}.pipeline.json")),
        dir.join(format!("{name}.meta.json")),
    ]
}

impl ModelBundle {
    /// Write the three bundle files; returns their paths.
    pub fn save(&self, dir: &Path) -> Result<[PathBuf; 3], ArtifactError> {
        if !valid_name(&self.meta.name) {
            return Err(ArtifactError::BadName(self.meta.name.clone()));
        }
        fs::create_dir_all(dir)?;
        let paths = bundle_paths(dir, &self.meta.name);
        save_model(&self.model, &paths[0]).map_err(|source| ArtifactError::Model { path: paths[0].clone(), source })?;
        fs::write(&paths[1], self.pipeline.to_json())?;
        let meta = BundleMeta { kind: Some(self.model.kind()), ..self.meta.clone() };
        fs::write(&paths[2], serde_json::to_string_pretty(&meta).expect("meta serializes"))?;
        Ok(paths)
    }

    /// Load a bundle by name. The metadata file is optional; the model must
    /// match the pipeline's schema.
    pub fn load(dir: &Path, name: &str) -> Result<Self, ArtifactError> {
        if !valid_name(name) {
            return Err(ArtifactError::BadName(name.to_owned()));
        }
        let [model_path, pipe_path, meta_path] = bundle_paths(dir, name);
        let model = load_model(&model_path).map_err(|source| ArtifactError::Model { path: model_path.clone(), source })?;
        let src = fs::read_to_string(&pipe_path)?;
        let pipe_err = |source| ArtifactError::Pipeline { path: pipe_path.clone(), source };
        let embeddings = match FittedPipeline::embedding_path_in(&src).map_err(pipe_err)? {
            Some(p) => load_embeddings_from(Some(&p)).map_err(|e| ArtifactError::Pipeline {
                path: p.clone(),
                source: FeatureError::Config(e.to_string()),
            })?,
            None => None,
        };
        let pipeline = FittedPipeline::from_json(&src, embeddings).map_err(pipe_err)?;
        model.check_pipeline(&pipeline).map_err(|_| ArtifactError::SchemaMismatch(name.to_owned()))?;
        let mut meta = if meta_path.exists() {
            let text = fs::read_to_string(&meta_path)?;
            serde_json::from_str(&text)
                .map_err(|e| ArtifactError::Meta { path: meta_path.clone(), message: e.to_string() })?
        } else {
            BundleMeta::default()
        };
        meta.name = name.to_owned();
        meta.kind = Some(model.kind());
        Ok(ModelBundle { meta, model, pipeline })
    }
}

/// Names of all bundles in `dir`, sorted.
pub fn list_bundles(dir: &Path) -> Result<Vec<String>, ArtifactError> {
    let mut names = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(MODEL_EXT) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if valid_name(stem) {
                    names.push(stem.to_owned());
                }
            }
        }
    }
    names.sort();
    Ok(names)
}

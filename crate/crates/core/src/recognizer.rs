//! A trained classifier bundled with the preprocessing and features it was
//! trained with: recording in, ranked hypotheses out.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::features::{compose, features_hash, total_dimension, FeatureSpec, Standardization};
use crate::gtw::{GtwError, GtwTemplateStore};
use crate::mlp::{deserialize_model, format_topology, serialize_model, MlpError, MlpModel};
use crate::preprocess::PreprocessingQueue;
use crate::recording::{ClassificationResult, Recording, SymbolTable};

pub const BUNDLE_FILE: &str = "recognizer.json";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RecognizerError {
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Gtw(#[from] GtwError),
}

pub enum Backend {
    Mlp(MlpModel),
    Gtw(GtwTemplateStore),
}

/// Where the backend lives, relative to the bundle file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum BackendRef {
    Mlp { model: String },
    Gtw { templates: String, templates_per_symbol: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleFile {
    pub format_version: u32,
    pub preprocessing: PreprocessingQueue,
    pub features: Vec<FeatureSpec>,
    pub standardization: Standardization,
    pub symbols: SymbolTable,
    pub backend: BackendRef,
}

/// Identity of a loaded recognizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecognizerInfo {
    pub backend: String,
    pub topology: Option<String>,
    pub features_hash: String,
    /// SHA-256 over the bundle and backend files.
    pub model_hash: String,
    pub symbol_count: usize,
}

pub struct Recognizer {
    pub bundle: BundleFile,
    pub backend: Backend,
    info: RecognizerInfo,
}

impl std::fmt::Debug for Recognizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Recognizer").field("info", &self.info).finish()
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> RecognizerError {
    RecognizerError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn format(path: &Path, e: impl std::fmt::Display) -> RecognizerError {
    RecognizerError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn hash_dir(hasher: &mut Sha256, dir: &Path) -> Result<(), RecognizerError> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        hasher.update(p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        hasher.update(fs::read(&p).map_err(|e| io(&p, e))?);
    }
    Ok(())
}

impl Recognizer {
    /// In-memory recognizer. The model hash covers the serialized bundle and
    /// model.
    pub fn new(bundle: BundleFile, backend: Backend) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(&bundle).expect("bundle serializes"));
        if let Backend::Mlp(m) = &backend {
            hasher.update(serialize_model(m));
        }
        let model_hash = hex::encode(hasher.finalize());
        Self::with_hash(bundle, backend, model_hash)
    }

    fn with_hash(bundle: BundleFile, backend: Backend, model_hash: String) -> Self {
        let (name, topology) = match &backend {
            Backend::Mlp(m) => ("mlp", Some(format_topology(&m.topology()))),
            Backend::Gtw(_) => ("gtw", None),
        };
        let info = RecognizerInfo {
            backend: name.into(),
            topology,
            features_hash: features_hash(&bundle.features),
            model_hash,
            symbol_count: bundle.symbols.len(),
        };
        Recognizer { bundle, backend, info }
    }

    /// Loads `recognizer.json` from `path`, or `path/recognizer.json` when
    /// `path` is a directory.
    pub fn load(path: &Path) -> Result<Self, RecognizerError> {
        let file = if path.is_dir() { path.join(BUNDLE_FILE) } else { path.to_path_buf() };
        let dir = file.parent().unwrap_or(Path::new(".")).to_path_buf();
        let bytes = fs::read(&file).map_err(|e| io(&file, e))?;
        let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| format(&file, e))?;
        match value.get("format_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(BUNDLE_VERSION) => {}
            Some(v) => return Err(format(&file, format!("format_version {v}, expected {BUNDLE_VERSION}"))),
            None => return Err(format(&file, "missing format_version")),
        }
        let bundle: BundleFile = serde_json::from_value(value).map_err(|e| format(&file, e))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let backend = match &bundle.backend {
            BackendRef::Mlp { model } => {
                let p = dir.join(model);
                let model_bytes = fs::read(&p).map_err(|e| io(&p, e))?;
                hasher.update(&model_bytes);
                let m = deserialize_model(&model_bytes).map_err(|e| format(&p, e))?;
                let dim = total_dimension(&bundle.features);
                if m.feature_dim() != dim {
                    return Err(format(
                        &p,
                        format!("model expects {} inputs, features give {}", m.feature_dim(), dim),
                    ));
                }
                if m.symbols != bundle.symbols {
                    return Err(format(&p, "model symbol table differs from the bundle"));
                }
                Backend::Mlp(m)
            }
            BackendRef::Gtw {
                templates,
                templates_per_symbol,
            } => {
                let p = dir.join(templates);
                hash_dir(&mut hasher, &p)?;
                Backend::Gtw(GtwTemplateStore::load(&p, *templates_per_symbol)?)
            }
        };
        if bundle.standardization.dimension() != total_dimension(&bundle.features) {
            return Err(format(
                &file,
                format!(
                    "standardization has {} dimensions, features {}",
                    bundle.standardization.dimension(),
                    total_dimension(&bundle.features)
                ),
            ));
        }
        Ok(Self::with_hash(bundle, backend, hex::encode(hasher.finalize())))
    }

    /// Writes the bundle file and the backend into `dir`.
    pub fn save(&self, dir: &Path) -> Result<(), RecognizerError> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        match (&self.backend, &self.bundle.backend) {
            (Backend::Mlp(m), BackendRef::Mlp { model }) => {
                let p = dir.join(model);
                fs::write(&p, serialize_model(m)).map_err(|e| io(&p, e))?;
            }
            (Backend::Gtw(store), BackendRef::Gtw { templates, .. }) => store.save(&dir.join(templates))?,
            _ => return Err(format(dir, "backend does not match its reference")),
        }
        let p = dir.join(BUNDLE_FILE);
        let mut text = serde_json::to_vec_pretty(&self.bundle).expect("bundle serializes");
        text.push(b'\n');
        fs::write(&p, text).map_err(|e| io(&p, e))
    }

    pub fn info(&self) -> &RecognizerInfo {
        &self.info
    }

    pub fn symbols(&self) -> &SymbolTable {
        &self.bundle.symbols
    }

    /// Feature vector after preprocessing and standardization.
    pub fn feature_vector(&self, rec: &Recording) -> Vec<f64> {
        let pre = self.bundle.preprocessing.apply(rec);
        let mut x = compose(&pre, &self.bundle.features);
        self.bundle.standardization.apply_in_place(&mut x);
        x
    }

    /// The `k` most probable symbols, descending.
    pub fn classify(&self, rec: &Recording, k: usize) -> Result<ClassificationResult, RecognizerError> {
        match &self.backend {
            Backend::Mlp(m) => Ok(m.predict_topk(&self.feature_vector(rec), k)?),
            Backend::Gtw(store) => Ok(store.classify(&self.bundle.preprocessing.apply(rec), k)?),
        }
    }
}

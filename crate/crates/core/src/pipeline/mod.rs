//! Experiment stages: preprocessing, feature extraction, training and
//! evaluation.
//!
//! Stages either run over a project tree, where each stage directory holds an
//! `info.yml` whose `data-source` names the directory of the previous stage:
//!
//! ```text
//! <root>/raw-datasets/<name>.jsonl, <name>.csv
//! <root>/preprocessed/<dir>/info.yml -> train|validation|test.jsonl/.csv
//! <root>/feature-files/<dir>/info.yml -> train|validation|test.bin
//! <root>/models/<dir>/info.yml -> model-N.json, recognizer.json, report.csv
//! ```
//!
//! or in memory from a single [`ExperimentConfig`] with [`run_experiment`].

pub mod config;
pub mod data;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

pub use config::{
    load_experiment, load_features, load_model, load_preprocessing, parse_experiment, parse_features, parse_model,
    parse_preprocessing, ConfigError, ExperimentConfig, FeatureConfig, ModelConfig, ModelKind, PreprocessingConfig,
    Pretraining, ScheduleKind, SplitFractions, TrainingSection,
};
pub use data::{
    allocate, dataset_exists, dataset_paths, read_dataset, read_feature_matrix, split_dataset, write_dataset,
    write_feature_matrix, FeatureMatrix, LabeledSet, Splits,
};

use crate::augment::AugmentError;
use crate::eval::{load_equivalences, EquivalenceClasses, EvalCase, EvalReport, BUNDLED_EQUIVALENCES};
use crate::features::{compose, features_hash, total_dimension, FeatureSpec, Standardization};
use crate::gtw::{GtwError, GtwTemplateStore};
use crate::mlp::{
    dae_pretrain, deserialize_model, init_model, serialize_model, slp_pretrain, top_k, train, Dataset, History,
    MlpError, MlpModel,
};
use crate::preprocess::PreprocessingQueue;
use crate::recognizer::{Backend, BackendRef, BundleFile, Recognizer, RecognizerError, BUNDLE_VERSION};
use crate::recording::{Recording, SymbolTable};

pub const INFO_FILE: &str = "info.yml";
pub const SYMBOLS_FILE: &str = "symbols.json";
pub const QUEUE_FILE: &str = "preprocessing.json";
pub const FEATURES_FILE: &str = "features.json";
pub const STANDARDIZATION_FILE: &str = "standardization.json";
pub const TRAIN_LOG_FILE: &str = "train-log.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const TEMPLATES_DIR: &str = "templates";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{config}: data source {source_path} not found{hint}", source_path = .missing.display(), config = .config.display())]
    Resolution {
        config: PathBuf,
        missing: PathBuf,
        hint: String,
    },
    #[error("{stage}: {reason}")]
    Stage { stage: &'static str, reason: String },
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Gtw(#[from] GtwError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Recognizer(#[from] RecognizerError),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn stage_err(stage: &'static str, reason: impl Into<String>) -> PipelineError {
    PipelineError::Stage {
        stage,
        reason: reason.into(),
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_vec_pretty(value).expect("value serializes");
    text.push(b'\n');
    write_file(path, text)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, PipelineError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| io_err(path, e))
}

/// Preprocessing, then a stratified split.
pub fn preprocess_and_split(
    set: &LabeledSet,
    queue: &PreprocessingQueue,
    split: &SplitFractions,
    seed: u64,
) -> Splits<Vec<Recording>> {
    let pre: Vec<Recording> = set.recordings.par_iter().map(|r| queue.apply(r)).collect();
    split_dataset(&pre, split.as_array(), seed)
}

/// Feature rows of already preprocessed recordings.
pub fn feature_rows(recs: &[Recording], specs: &[FeatureSpec]) -> Vec<Vec<f64>> {
    recs.par_iter().map(|r| compose(r, specs)).collect()
}

fn to_matrix(rows: Vec<Vec<f64>>, dim: usize, recs: &[Recording], hash: &str) -> Result<FeatureMatrix, PipelineError> {
    let labels = recs
        .iter()
        .enumerate()
        .map(|(k, r)| r.label.ok_or_else(|| stage_err("features", format!("recording {k} has no label"))))
        .collect::<Result<Vec<_>, _>>()?;
    let n = rows.len();
    let x = Array2::from_shape_vec((n, dim), rows.into_iter().flatten().collect())
        .map_err(|e| stage_err("features", e.to_string()))?;
    Ok(FeatureMatrix {
        features_hash: hash.to_string(),
        x,
        labels,
    })
}

/// Augments the training part, computes features for all parts and
/// standardizes them with statistics of the (augmented) training part.
pub fn extract_features(
    splits: &Splits<Vec<Recording>>,
    config: &FeatureConfig,
) -> Result<(Splits<FeatureMatrix>, Standardization), PipelineError> {
    let mut train_recs = splits.train.clone();
    for step in &config.data_multiplication {
        step.validate()?;
        train_recs = step.apply(&train_recs)?;
    }
    if train_recs.is_empty() {
        return Err(stage_err("features", "training part is empty"));
    }
    let specs = &config.features;
    let dim = total_dimension(specs);
    let hash = features_hash(specs);
    let train_rows = feature_rows(&train_recs, specs);
    let standardization = Standardization::fit(&train_rows, config.standardization);
    let finish = |rows: Vec<Vec<f64>>, recs: &[Recording]| {
        let rows = rows.into_iter().map(|r| standardization.apply(&r)).collect();
        to_matrix(rows, dim, recs, &hash)
    };
    let out = Splits {
        train: finish(train_rows, &train_recs)?,
        validation: finish(feature_rows(&splits.validation, specs), &splits.validation)?,
        test: finish(feature_rows(&splits.test, specs), &splits.test)?,
    };
    Ok((out, standardization))
}

fn to_dataset(m: &FeatureMatrix, symbols: &SymbolTable) -> Result<Dataset, PipelineError> {
    let labels = m
        .labels
        .iter()
        .map(|&id| {
            symbols
                .index_of(id)
                .ok_or_else(|| stage_err("train", format!("label {id} is not in the symbol table")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(m.x.clone(), labels))
}

/// Models and log of one training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// State before the final training stage.
    pub initial: MlpModel,
    pub model: MlpModel,
    pub history: History,
    /// `stage,epoch,eta,train_err,valid_err,loss` rows of every stage.
    pub log: String,
}

const LOG_HEADER: &str = "stage,epoch,eta,train_err,valid_err,loss\n";

fn append_log(log: &mut String, stage: &str, history: &History) {
    for r in &history.records {
        let valid = r.valid_err.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(log, "{stage},{},{},{},{},{}", r.epoch, r.eta, r.train_err, valid, r.loss);
    }
}

/// Trains an MLP. With `start` the run continues from that model and
/// pretraining is skipped.
pub fn train_mlp(
    features: &Splits<FeatureMatrix>,
    symbols: &SymbolTable,
    config: &ModelConfig,
    seed: u64,
    start: Option<MlpModel>,
) -> Result<TrainOutcome, PipelineError> {
    let ModelKind::Mlp { topology, hidden } = &config.kind else {
        return Err(stage_err("train", "model type is not mlp"));
    };
    let dim = features.train.x.ncols();
    if topology[0] != dim {
        return Err(stage_err(
            "train",
            format!("topology input width {} does not match the {dim} features", topology[0]),
        ));
    }
    if topology[topology.len() - 1] != symbols.len() {
        return Err(stage_err(
            "train",
            format!(
                "topology output width {} does not match the {} symbols",
                topology[topology.len() - 1],
                symbols.len()
            ),
        ));
    }
    let train_set = to_dataset(&features.train, symbols)?;
    let valid_set = to_dataset(&features.validation, symbols)?;
    let valid = (!valid_set.is_empty()).then_some(&valid_set);
    let tc = config.training.train_config(seed);
    let mut log = String::from(LOG_HEADER);

    let initial = match (start, config.training.pretraining) {
        (Some(m), _) => m,
        (None, Pretraining::None) => init_model(topology, *hidden, symbols.clone(), seed)?,
        (None, Pretraining::Slp) => {
            let mut first = None;
            let (model, histories) = slp_pretrain(topology, *hidden, symbols.clone(), &train_set, valid, &tc, &mut |s, m| {
                if s == 1 {
                    first = Some(m.clone());
                }
            })?;
            for (i, h) in histories.iter().enumerate() {
                append_log(&mut log, &format!("slp-{}", i + 1), h);
            }
            let history = histories.last().cloned().unwrap_or_default();
            return Ok(TrainOutcome {
                initial: first.expect("first stage runs"),
                model,
                history,
                log,
            });
        }
        (None, Pretraining::Dae) => {
            let mut dae = config.training.dae;
            dae.seed = seed;
            dae.first_activation = *hidden;
            dae.hidden_activation = *hidden;
            let (model, report) = dae_pretrain(topology, symbols.clone(), &train_set.x, &dae)?;
            for (layer, errors) in report.reconstruction.iter().enumerate() {
                for (epoch, e) in errors.iter().enumerate() {
                    let _ = writeln!(log, "dae-{},{epoch},{},,,{e}", layer + 1, dae.learning_rate);
                }
            }
            model
        }
    };
    let (model, history) = train(initial.clone(), &train_set, valid, &tc)?;
    append_log(&mut log, "train", &history);
    Ok(TrainOutcome {
        initial,
        model,
        history,
        log,
    })
}

/// Evaluation cases of an MLP on standardized feature rows.
pub fn mlp_cases(model: &MlpModel, m: &FeatureMatrix) -> Vec<EvalCase> {
    if m.labels.is_empty() {
        return Vec::new();
    }
    let probs = model.forward_batch(&m.x);
    probs
        .rows()
        .into_iter()
        .zip(&m.labels)
        .map(|(row, &label)| (top_k(&model.symbols, &row.to_vec(), 10), label))
        .collect()
}

/// Evaluation cases of a template store on preprocessed recordings.
pub fn gtw_cases(store: &GtwTemplateStore, recs: &[Recording]) -> Result<Vec<EvalCase>, PipelineError> {
    recs.par_iter()
        .filter_map(|r| r.label.map(|l| (r, l)))
        .map(|(r, l)| Ok((store.classify(r, 10)?, l)))
        .collect()
}

/// Equivalence classes from `path`, or the bundled table.
pub fn equivalences_for(symbols: &SymbolTable, path: Option<&Path>) -> Result<EquivalenceClasses, PipelineError> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| io_err(p, e))?,
        None => BUNDLED_EQUIVALENCES.to_string(),
    };
    let (classes, warnings) = load_equivalences(&text, symbols);
    if !warnings.is_empty() {
        tracing::info!(skipped = warnings.len(), "equivalence pairs not applicable to this symbol set");
    }
    for w in warnings {
        tracing::debug!("{w}");
    }
    Ok(classes)
}

fn mlp_bundle(
    queue: &PreprocessingQueue,
    features: &[FeatureSpec],
    standardization: &Standardization,
    symbols: &SymbolTable,
    model_file: &str,
) -> BundleFile {
    BundleFile {
        format_version: BUNDLE_VERSION,
        preprocessing: queue.clone(),
        features: features.to_vec(),
        standardization: standardization.clone(),
        symbols: symbols.clone(),
        backend: BackendRef::Mlp {
            model: model_file.to_string(),
        },
    }
}

fn gtw_bundle(queue: &PreprocessingQueue, symbols: &SymbolTable, templates_per_symbol: usize) -> BundleFile {
    BundleFile {
        format_version: BUNDLE_VERSION,
        preprocessing: queue.clone(),
        features: Vec::new(),
        standardization: Standardization::identity(0),
        symbols: symbols.clone(),
        backend: BackendRef::Gtw {
            templates: TEMPLATES_DIR.into(),
            templates_per_symbol,
        },
    }
}

pub fn model_file_name(n: usize) -> String {
    format!("model-{n}.json")
}

/// Highest `N` of the `model-N.json` files in `dir`.
pub fn latest_model_number(dir: &Path) -> Option<usize> {
    fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            name.strip_prefix("model-")?.strip_suffix(".json")?.parse().ok()
        })
        .max()
}

/// Everything an in-memory experiment produced.
pub struct ExperimentResult {
    pub recognizer: Recognizer,
    pub report: EvalReport,
    pub history: Option<History>,
    /// Serialized final model (MLP only).
    pub model_bytes: Option<Vec<u8>>,
}

/// Runs all stages of `config` on `set` and writes `model-0.json`,
/// `model-1.json`, `standardization.json`, `train-log.csv`, `report.csv` and
/// `recognizer.json` into `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    set: &LabeledSet,
    out_dir: &Path,
) -> Result<ExperimentResult, PipelineError> {
    let seed = config.seed;
    let queue = &config.preprocessing.queue;
    let splits = preprocess_and_split(set, queue, &config.preprocessing.split, seed);
    tracing::info!(
        train = splits.train.len(),
        validation = splits.validation.len(),
        test = splits.test.len(),
        "split"
    );
    let classes = equivalences_for(&set.symbols, config.model.equivalences.as_deref().map(Path::new))?;
    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    match &config.model.kind {
        ModelKind::Mlp { .. } => {
            let (features, standardization) = extract_features(&splits, &config.features)?;
            let outcome = train_mlp(&features, &set.symbols, &config.model, seed, None)?;
            let report = EvalReport::compute(&mlp_cases(&outcome.model, &features.test), &classes);
            let model_bytes = serialize_model(&outcome.model);
            write_file(&out_dir.join(model_file_name(0)), serialize_model(&outcome.initial))?;
            write_file(&out_dir.join(model_file_name(1)), &model_bytes)?;
            write_json(&out_dir.join(STANDARDIZATION_FILE), &standardization)?;
            write_file(&out_dir.join(TRAIN_LOG_FILE), &outcome.log)?;
            write_file(&out_dir.join(REPORT_FILE), report.to_csv())?;
            let bundle = mlp_bundle(
                queue,
                &config.features.features,
                &standardization,
                &set.symbols,
                &model_file_name(1),
            );
            let recognizer = Recognizer::new(bundle, Backend::Mlp(outcome.model));
            recognizer.save(out_dir)?;
            Ok(ExperimentResult {
                recognizer,
                report,
                history: Some(outcome.history),
                model_bytes: Some(model_bytes),
            })
        }
        ModelKind::Gtw { templates_per_symbol } => {
            let store = GtwTemplateStore::from_recordings(&splits.train, *templates_per_symbol);
            let report = EvalReport::compute(&gtw_cases(&store, &splits.test)?, &classes);
            write_file(&out_dir.join(REPORT_FILE), report.to_csv())?;
            let recognizer = Recognizer::new(
                gtw_bundle(queue, &set.symbols, *templates_per_symbol),
                Backend::Gtw(store),
            );
            recognizer.save(out_dir)?;
            Ok(ExperimentResult {
                recognizer,
                report,
                history: None,
                model_bytes: None,
            })
        }
    }
}

/// Resolves `data_source` of the config at `config_path` against `root`.
fn resolve(
    root: &Path,
    config_path: &Path,
    source: Option<&str>,
    exists: impl Fn(&Path) -> bool,
    hint: &str,
) -> Result<PathBuf, PipelineError> {
    let Some(source) = source else {
        return Err(PipelineError::Resolution {
            config: config_path.to_path_buf(),
            missing: PathBuf::from("<none>"),
            hint: ": set data-source".into(),
        });
    };
    let path = root.join(source);
    if exists(&path) {
        Ok(path)
    } else {
        Err(PipelineError::Resolution {
            config: config_path.to_path_buf(),
            missing: path,
            hint: format!(" ({hint})"),
        })
    }
}

fn stage_dir_config(dir: &Path) -> PathBuf {
    dir.join(INFO_FILE)
}

fn is_preprocessed_dir(p: &Path) -> bool {
    p.join(QUEUE_FILE).is_file() && p.join(SYMBOLS_FILE).is_file()
}

fn is_feature_dir(p: &Path) -> bool {
    p.join(FEATURES_FILE).is_file() && p.join("train.bin").is_file()
}

/// Runs the preprocessing stage of `stage_dir`.
pub fn run_preprocessing(root: &Path, stage_dir: &Path, seed: u64) -> Result<Splits<usize>, PipelineError> {
    let info = stage_dir_config(stage_dir);
    let config = load_preprocessing(&info)?;
    let raw = resolve(
        root,
        &info,
        config.data_source.as_deref(),
        dataset_exists,
        "expected <name>.jsonl and <name>.csv",
    )?;
    let set = read_dataset(&raw, None)?;
    let splits = preprocess_and_split(&set, &config.queue, &config.split, seed);
    for (name, part) in Splits::<()>::NAMES.iter().zip(splits.as_array()) {
        write_dataset(
            &stage_dir.join(name),
            &LabeledSet {
                symbols: set.symbols.clone(),
                recordings: part.clone(),
            },
        )?;
    }
    write_json(&stage_dir.join(SYMBOLS_FILE), &set.symbols)?;
    write_json(&stage_dir.join(QUEUE_FILE), &config.queue)?;
    Ok(splits.map(|_, v| v.len()))
}

fn read_preprocessed(dir: &Path) -> Result<(SymbolTable, Splits<Vec<Recording>>, PreprocessingQueue), PipelineError> {
    let symbols: SymbolTable = read_json(&dir.join(SYMBOLS_FILE))?;
    let queue: PreprocessingQueue = read_json(&dir.join(QUEUE_FILE))?;
    let read = |name: &str| read_dataset(&dir.join(name), Some(&symbols)).map(|s| s.recordings);
    let splits = Splits {
        train: read("train")?,
        validation: read("validation")?,
        test: read("test")?,
    };
    Ok((symbols, splits, queue))
}

/// Runs the feature stage of `stage_dir`.
pub fn run_featurize(root: &Path, stage_dir: &Path) -> Result<Splits<usize>, PipelineError> {
    let info = stage_dir_config(stage_dir);
    let config = load_features(&info)?;
    let source = resolve(
        root,
        &info,
        config.data_source.as_deref(),
        is_preprocessed_dir,
        "run the preprocessing stage first",
    )?;
    let (symbols, splits, queue) = read_preprocessed(&source)?;
    let (features, standardization) = extract_features(&splits, &config)?;
    for (name, m) in Splits::<()>::NAMES.iter().zip(features.as_array()) {
        write_feature_matrix(&stage_dir.join(format!("{name}.bin")), m)?;
    }
    write_json(&stage_dir.join(SYMBOLS_FILE), &symbols)?;
    write_json(&stage_dir.join(QUEUE_FILE), &queue)?;
    write_json(&stage_dir.join(FEATURES_FILE), &config.features)?;
    write_json(&stage_dir.join(STANDARDIZATION_FILE), &standardization)?;
    Ok(features.map(|_, m| m.labels.len()))
}

/// Contents of a feature directory.
struct FeatureDir {
    symbols: SymbolTable,
    splits: Splits<FeatureMatrix>,
    specs: Vec<FeatureSpec>,
    standardization: Standardization,
    queue: PreprocessingQueue,
}

fn read_feature_dir(dir: &Path) -> Result<FeatureDir, PipelineError> {
    let symbols: SymbolTable = read_json(&dir.join(SYMBOLS_FILE))?;
    let specs: Vec<FeatureSpec> = read_json(&dir.join(FEATURES_FILE))?;
    let standardization: Standardization = read_json(&dir.join(STANDARDIZATION_FILE))?;
    let queue: PreprocessingQueue = read_json(&dir.join(QUEUE_FILE))?;
    let hash = features_hash(&specs);
    let read = |name: &str| read_feature_matrix(&dir.join(format!("{name}.bin")), Some(&hash));
    let splits = Splits {
        train: read("train")?,
        validation: read("validation")?,
        test: read("test")?,
    };
    Ok(FeatureDir {
        symbols,
        splits,
        specs,
        standardization,
        queue,
    })
}

/// Runs the training stage of `stage_dir`. An MLP continues from the latest
/// `model-N.json` (creating `model-0.json` first) and writes `model-N+1.json`.
/// Returns the path of the written bundle.
pub fn run_training(root: &Path, stage_dir: &Path, seed: u64) -> Result<PathBuf, PipelineError> {
    let info = stage_dir_config(stage_dir);
    let config = load_model(&info)?;
    match &config.kind {
        ModelKind::Mlp { .. } => {
            let source = resolve(
                root,
                &info,
                config.data_source.as_deref(),
                is_feature_dir,
                "run the feature stage first",
            )?;
            let FeatureDir {
                symbols,
                splits: features,
                specs,
                standardization,
                queue,
            } = read_feature_dir(&source)?;
            let start = match latest_model_number(stage_dir) {
                Some(n) => {
                    let p = stage_dir.join(model_file_name(n));
                    let bytes = fs::read(&p).map_err(|e| io_err(&p, e))?;
                    Some((n, deserialize_model(&bytes).map_err(|e| io_err(&p, e))?))
                }
                None => None,
            };
            let (n, start) = match start {
                Some((n, m)) => (n, Some(m)),
                None => (0, None),
            };
            let outcome = train_mlp(&features, &symbols, &config, seed, start)?;
            if n == 0 {
                write_file(&stage_dir.join(model_file_name(0)), serialize_model(&outcome.initial))?;
            }
            let name = model_file_name(n + 1);
            write_file(&stage_dir.join(&name), serialize_model(&outcome.model))?;
            let log_path = stage_dir.join(TRAIN_LOG_FILE);
            let log = if log_path.is_file() {
                let mut old = fs::read_to_string(&log_path).map_err(|e| io_err(&log_path, e))?;
                old.push_str(outcome.log.strip_prefix(LOG_HEADER).unwrap_or(&outcome.log));
                old
            } else {
                outcome.log
            };
            write_file(&log_path, log)?;
            let bundle = mlp_bundle(&queue, &specs, &standardization, &symbols, &name);
            Recognizer::new(bundle, Backend::Mlp(outcome.model)).save(stage_dir)?;
        }
        ModelKind::Gtw { templates_per_symbol } => {
            let source = resolve(
                root,
                &info,
                config.data_source.as_deref(),
                is_preprocessed_dir,
                "run the preprocessing stage first",
            )?;
            let (symbols, splits, queue) = read_preprocessed(&source)?;
            let store = GtwTemplateStore::from_recordings(&splits.train, *templates_per_symbol);
            let templates = stage_dir.join(TEMPLATES_DIR);
            if templates.is_dir() {
                fs::remove_dir_all(&templates).map_err(|e| io_err(&templates, e))?;
            }
            Recognizer::new(gtw_bundle(&queue, &symbols, *templates_per_symbol), Backend::Gtw(store)).save(stage_dir)?;
        }
    }
    Ok(stage_dir.join(crate::recognizer::BUNDLE_FILE))
}

/// Evaluates the model of `stage_dir` on the test part of its data source
/// and writes `report.csv`.
pub fn run_evaluation(root: &Path, stage_dir: &Path) -> Result<EvalReport, PipelineError> {
    let info = stage_dir_config(stage_dir);
    let config = load_model(&info)?;
    let recognizer = Recognizer::load(stage_dir)?;
    let equivalences = config.equivalences.as_deref().map(|p| root.join(p));
    let classes = equivalences_for(recognizer.symbols(), equivalences.as_deref())?;
    let cases = match (&recognizer.backend, &config.kind) {
        (Backend::Mlp(model), ModelKind::Mlp { .. }) => {
            let source = resolve(root, &info, config.data_source.as_deref(), is_feature_dir, "run the feature stage first")?;
            let hash = features_hash(&recognizer.bundle.features);
            mlp_cases(model, &read_feature_matrix(&source.join("test.bin"), Some(&hash))?)
        }
        (Backend::Gtw(store), ModelKind::Gtw { .. }) => {
            let source = resolve(
                root,
                &info,
                config.data_source.as_deref(),
                is_preprocessed_dir,
                "run the preprocessing stage first",
            )?;
            gtw_cases(store, &read_preprocessed(&source)?.1.test)?
        }
        _ => return Err(stage_err("evaluate", "bundle backend differs from the configured model type")),
    };
    let report = EvalReport::compute(&cases, &classes);
    write_file(&stage_dir.join(REPORT_FILE), report.to_csv())?;
    Ok(report)
}

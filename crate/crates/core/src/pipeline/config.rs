//! YAML configuration for the preprocessing, feature and model stages.
//!
//! Keys may use `-` or `_`. Steps and features are lists whose items are a
//! bare name, `Name: null`, `Name: {param: value}` or `Name: [{param: value}]`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_yaml::{Mapping, Value};

use crate::augment::AugmentationStep;
use crate::features::{
    total_dimension, validate_features, BitmapSize, FeatureSpec, FirstN, LocalWindow, PointCoordinates,
    StandardizationMode, Strokes,
};
use crate::mlp::{parse_topology, Activation, DaeConfig, NewbobConfig, Regularization, Schedule, TrainConfig};
use crate::preprocess::{Interpolation, PreprocessingQueue, PreprocessingStep, ShiftVariant};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{}:", file.display())?;
        }
        if let Some(line) = self.line {
            write!(f, "{line}:")?;
        }
        if self.file.is_some() || self.line.is_some() {
            write!(f, " ")?;
        }
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Accumulates errors against the source text so they can name a line.
struct Ctx<'a> {
    text: &'a str,
}

impl Ctx<'_> {
    fn err(&self, token: &str, message: impl Into<String>) -> ConfigError {
        ConfigError {
            file: None,
            line: line_of(self.text, token),
            message: message.into(),
        }
    }

    fn yaml(&self, e: serde_yaml::Error) -> ConfigError {
        let line = e.location().map(|l| l.line());
        let message = e.to_string();
        // serde names the offending field in backticks
        let line = line.or_else(|| {
            message
                .split('`')
                .nth(1)
                .and_then(|tok| line_of(self.text, tok).or_else(|| line_of(self.text, &tok.replace('_', "-"))))
        });
        ConfigError {
            file: None,
            line,
            message,
        }
    }
}

/// 1-based line of the first occurrence of `token` as a key or list item.
fn line_of(text: &str, token: &str) -> Option<usize> {
    if token.is_empty() {
        return None;
    }
    text.lines().position(|l| l.contains(token)).map(|i| i + 1)
}

fn normalize_keys(v: Value) -> Value {
    match v {
        Value::Mapping(m) => Value::Mapping(
            m.into_iter()
                .map(|(k, v)| {
                    let k = match k {
                        Value::String(s) => Value::String(s.replace('-', "_")),
                        other => other,
                    };
                    (k, normalize_keys(v))
                })
                .collect(),
        ),
        Value::Sequence(s) => Value::Sequence(s.into_iter().map(normalize_keys).collect()),
        other => other,
    }
}

fn parse_root(text: &str) -> Result<Mapping, ConfigError> {
    let ctx = Ctx { text };
    let v: Value = serde_yaml::from_str(text).map_err(|e| ctx.yaml(e))?;
    match normalize_keys(v) {
        Value::Mapping(m) => Ok(m),
        Value::Null => Ok(Mapping::new()),
        _ => Err(ConfigError {
            file: None,
            line: Some(1),
            message: "configuration must be a mapping".into(),
        }),
    }
}

fn key_str(k: &Value) -> String {
    match k {
        Value::String(s) => s.clone(),
        other => serde_yaml::to_string(other).unwrap_or_default().trim().to_string(),
    }
}

/// `[Name, {Name: null}, {Name: {..}}, {Name: [{..}, ..]}]` into names with
/// merged parameter maps.
fn named_items(ctx: &Ctx, v: &Value, what: &str) -> Result<Vec<(String, Mapping)>, ConfigError> {
    let items = match v {
        Value::Sequence(s) => s,
        Value::Null => return Ok(Vec::new()),
        _ => return Err(ctx.err(what, format!("{what} must be a list"))),
    };
    items
        .iter()
        .map(|item| match item {
            Value::String(name) => Ok((name.clone(), Mapping::new())),
            Value::Mapping(m) if m.len() == 1 => {
                let (k, v) = m.iter().next().expect("one entry");
                let name = key_str(k);
                let params = match v {
                    Value::Null => Mapping::new(),
                    Value::Mapping(p) => p.clone(),
                    Value::Sequence(list) => {
                        let mut merged = Mapping::new();
                        for entry in list {
                            match entry {
                                Value::Mapping(p) => merged.extend(p.clone()),
                                _ => {
                                    return Err(ctx.err(&name, format!("{name}: parameters must be key: value pairs")))
                                }
                            }
                        }
                        merged
                    }
                    _ => return Err(ctx.err(&name, format!("{name}: parameters must be a list or mapping"))),
                };
                Ok((name, params))
            }
            _ => Err(ctx.err(what, format!("each {what} entry must be a name or a single-key mapping"))),
        })
        .collect()
}

/// Pulls typed parameters out of a step's map, then rejects leftovers.
struct Params<'a> {
    ctx: &'a Ctx<'a>,
    step: String,
    map: Mapping,
}

impl Params<'_> {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.map.remove(Value::String(key.to_string()))
    }

    fn f64(&mut self, key: &str, default: Option<f64>) -> Result<f64, ConfigError> {
        match self.take(key) {
            Some(v) => v
                .as_f64()
                .ok_or_else(|| self.ctx.err(key, format!("{}: {key} must be a number", self.step))),
            None => default.ok_or_else(|| self.ctx.err(&self.step, format!("{}: missing parameter {key}", self.step))),
        }
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.take(key) {
            Some(v) => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| self.ctx.err(key, format!("{}: {key} must be a non-negative integer", self.step))),
            None => Ok(default),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.take(key) {
            Some(Value::String(s)) => Ok(Some(s)),
            Some(Value::Bool(b)) => Ok(Some(b.to_string())),
            Some(_) => Err(self.ctx.err(key, format!("{}: {key} must be a string", self.step))),
            None => Ok(None),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.map.keys().next() {
            Some(k) => {
                let k = key_str(k);
                Err(self.ctx.err(&k, format!("{}: unknown parameter {k}", self.step)))
            }
            None => Ok(()),
        }
    }
}

fn parse_step(ctx: &Ctx, name: &str, map: Mapping) -> Result<PreprocessingStep, ConfigError> {
    use PreprocessingStep as S;
    let mut p = Params {
        ctx,
        step: name.to_string(),
        map,
    };
    let step = match name {
        "RemoveDuplicateTime" => S::RemoveDuplicateTime,
        "RemoveDots" => S::RemoveDots,
        "DotReduction" => S::DotReduction {
            threshold: p.f64("threshold", Some(5.0))?,
        },
        "WildPointFilter" => S::WildPointFilter {
            threshold: p.f64("threshold", Some(3.0))?,
        },
        "StrokeConnect" => S::StrokeConnect {
            minimum_distance: p.f64("minimum_distance", Some(10.0))?,
        },
        "WeightedAverageSmoothing" => {
            let theta = match p.take("theta") {
                None => [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0],
                Some(v) => {
                    let list: Vec<f64> = serde_yaml::from_value(v).map_err(|e| ctx.yaml(e))?;
                    list.try_into()
                        .map_err(|_| ctx.err("theta", "WeightedAverageSmoothing: theta needs 3 weights"))?
                }
            };
            S::WeightedAverageSmoothing { theta }
        }
        "Dehook" => S::Dehook {
            angle_threshold: p.f64("angle_threshold", None)?,
        },
        "DouglasPeucker" => S::DouglasPeucker {
            epsilon: p.f64("epsilon", None)?,
        },
        "ScaleAndShift" => {
            let max_width = p.f64("max_width", Some(1.0))?;
            let max_height = p.f64("max_height", Some(1.0))?;
            let center = p.string("center")?;
            let variant = p.string("variant")?;
            let variant = match (variant.as_deref(), center.as_deref()) {
                (Some(_), Some(_)) => return Err(ctx.err("center", "ScaleAndShift: give either center or variant")),
                (Some(v), None) => match v.to_ascii_uppercase().as_str() {
                    "I1" => ShiftVariant::I1,
                    "I2" => ShiftVariant::I2,
                    "I3" => ShiftVariant::I3,
                    _ => return Err(ctx.err("variant", format!("ScaleAndShift: unknown variant {v}"))),
                },
                (None, Some("true")) | (None, None) => ShiftVariant::I1,
                (None, Some("false")) => ShiftVariant::I2,
                (None, Some(other)) => {
                    return Err(ctx.err("center", format!("ScaleAndShift: center must be true or false, got {other}")))
                }
            };
            S::ScaleAndShift {
                variant,
                max_width,
                max_height,
            }
        }
        "SpaceEvenly" => S::SpaceEvenly {
            number: p.usize("number", 100)?,
        },
        "SpaceEvenlyPerStroke" => {
            let number = p.usize("number", 20)?;
            let kind = match p.string("kind")?.as_deref() {
                None | Some("linear") => Interpolation::Linear,
                Some("cubic") => Interpolation::Cubic,
                Some(k) => return Err(ctx.err("kind", format!("SpaceEvenlyPerStroke: unknown kind {k}"))),
            };
            S::SpaceEvenlyPerStroke { number, kind }
        }
        other => {
            return Err(ctx.err(
                other,
                format!(
                    "unknown preprocessing step {other:?} (known: {})",
                    PreprocessingStep::NAMES.join(", ")
                ),
            ))
        }
    };
    p.finish()?;
    step.validate().map_err(|e| ctx.err(name, e.to_string()))?;
    Ok(step)
}

fn params_as<T: serde::de::DeserializeOwned>(ctx: &Ctx, name: &str, map: Mapping) -> Result<T, ConfigError> {
    serde_yaml::from_value(Value::Mapping(map)).map_err(|e| {
        let mut err = ctx.yaml(e);
        err.message = format!("{name}: {}", err.message);
        err.line = err.line.or_else(|| line_of(ctx.text, name));
        err
    })
}

fn parse_feature(ctx: &Ctx, name: &str, map: Mapping) -> Result<FeatureSpec, ConfigError> {
    use FeatureSpec as F;
    let unit = |spec: FeatureSpec, map: &Mapping| {
        if map.is_empty() {
            Ok(spec)
        } else {
            Err(ctx.err(name, format!("{name} takes no parameters")))
        }
    };
    let spec = match name {
        "ConstantPointCoordinates" => F::ConstantPointCoordinates(params_as::<PointCoordinates>(ctx, name, map)?),
        "FirstNPoints" => F::FirstNPoints(params_as::<FirstN>(ctx, name, map)?),
        "Bitmap" => F::Bitmap(params_as::<BitmapSize>(ctx, name, map)?),
        "StrokeCenter" => F::StrokeCenter(params_as::<Strokes>(ctx, name, map)?),
        "StrokeIntersections" => F::StrokeIntersections(params_as::<Strokes>(ctx, name, map)?),
        "ReCurvature" => F::ReCurvature(params_as::<Strokes>(ctx, name, map)?),
        "Direction" => F::Direction(params_as::<LocalWindow>(ctx, name, map)?),
        "Curvature" => F::Curvature(params_as::<LocalWindow>(ctx, name, map)?),
        "StrokeCount" => unit(F::StrokeCount, &map)?,
        "Ink" => unit(F::Ink, &map)?,
        "AspectRatio" => unit(F::AspectRatio, &map)?,
        "Width" => unit(F::Width, &map)?,
        "Height" => unit(F::Height, &map)?,
        "Time" => unit(F::Time, &map)?,
        "CenterOfMass" => unit(F::CenterOfMass, &map)?,
        other => {
            return Err(ctx.err(
                other,
                format!("unknown feature {other:?} (known: {})", FeatureSpec::NAMES.join(", ")),
            ))
        }
    };
    spec.validate().map_err(|e| ctx.err(name, e.to_string()))?;
    Ok(spec)
}

fn parse_augmentation(ctx: &Ctx, name: &str, map: Mapping) -> Result<AugmentationStep, ConfigError> {
    let mut p = Params {
        ctx,
        step: name.to_string(),
        map,
    };
    let step = match name {
        "Multiply" => AugmentationStep::Multiply { nr: p.usize("nr", 1)? },
        "Rotate" => {
            let min = p.f64("min", None)?;
            let max = p.f64("max", None)?;
            let num = p.f64("num", None)?;
            if num < 0.0 || num.fract() != 0.0 {
                return Err(ctx.err("num", "Rotate: num must be a non-negative integer"));
            }
            AugmentationStep::Rotate {
                min,
                max,
                num: num as usize,
            }
        }
        other => return Err(ctx.err(other, format!("unknown data multiplication {other:?} (known: Multiply, Rotate)"))),
    };
    p.finish()?;
    step.validate().map_err(|e| ctx.err(name, e.to_string()))?;
    Ok(step)
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }

    pub fn validate(&self) -> Result<(), String> {
        let a = self.as_array();
        if a.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(format!("split fractions {a:?} must lie in [0, 1]"));
        }
        if (a.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(format!("split fractions {a:?} must sum to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessingConfig {
    /// Raw dataset, relative to the project root, without extension.
    pub data_source: Option<String>,
    pub queue: PreprocessingQueue,
    pub split: SplitFractions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Preprocessed directory, relative to the project root.
    pub data_source: Option<String>,
    /// Applied to the training split only.
    pub data_multiplication: Vec<AugmentationStep>,
    pub features: Vec<FeatureSpec>,
    pub standardization: StandardizationMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pretraining {
    #[default]
    None,
    Slp,
    Dae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    FixedEpochs,
    Newbob,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub schedule: ScheduleKind,
    pub newbob: NewbobConfig,
    pub l1: f64,
    pub l2: f64,
    pub shuffle: bool,
    pub pretraining: Pretraining,
    pub dae: DaeConfig,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainingSection {
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            batch_size: t.batch_size,
            schedule: ScheduleKind::FixedEpochs,
            newbob: NewbobConfig::default(),
            l1: 0.0,
            l2: 0.0,
            shuffle: true,
            pretraining: Pretraining::None,
            dae: DaeConfig::default(),
        }
    }
}

impl TrainingSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let regularization = if self.l1 > 0.0 {
            Regularization::L1(self.l1)
        } else if self.l2 > 0.0 {
            Regularization::L2(self.l2)
        } else {
            Regularization::None
        };
        TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            batch_size: self.batch_size,
            epochs: self.epochs,
            schedule: match self.schedule {
                ScheduleKind::FixedEpochs => Schedule::FixedEpochs,
                ScheduleKind::Newbob => Schedule::Newbob(self.newbob),
            },
            regularization,
            seed,
            shuffle: self.shuffle,
        }
    }

    /// Reads the flags of a toolkit command template such as
    /// `'{{nntoolkit}} train --epochs 1000 --learning-rate 0.1 --momentum 0.1 ...'`.
    pub fn from_command_template(cmd: &str) -> Result<Self, String> {
        let mut out = TrainingSection::default();
        let words: Vec<&str> = cmd.split_whitespace().collect();
        let mut i = 0;
        while i < words.len() {
            let flag = words[i];
            let value = words.get(i + 1).copied();
            let num = |v: Option<&str>| -> Result<f64, String> {
                v.and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| format!("{flag} needs a numeric value"))
            };
            match flag {
                "--epochs" => out.epochs = num(value)? as usize,
                "--learning-rate" => out.learning_rate = num(value)?,
                "--momentum" => out.momentum = num(value)?,
                "--batch-size" => out.batch_size = num(value)? as usize,
                _ => {
                    i += 1;
                    continue;
                }
            }
            i += 2;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Mlp { topology: Vec<usize>, hidden: Activation },
    Gtw { templates_per_symbol: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Feature directory (MLP) or preprocessed directory (GTW), relative to
    /// the project root.
    pub data_source: Option<String>,
    pub kind: ModelKind,
    pub training: TrainingSection,
    /// Equivalence CSV for MER, relative to the project root; the bundled
    /// table when absent.
    pub equivalences: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub preprocessing: PreprocessingConfig,
    pub features: FeatureConfig,
    pub model: ModelConfig,
}

fn string_field(ctx: &Ctx, m: &Mapping, key: &str) -> Result<Option<String>, ConfigError> {
    match m.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(ctx.err(&key.replace('_', "-"), format!("{key} must be a string"))),
    }
}

fn check_keys(ctx: &Ctx, m: &Mapping, allowed: &[&str], section: &str) -> Result<(), ConfigError> {
    for k in m.keys() {
        let k = key_str(k);
        if !allowed.contains(&k.as_str()) {
            let token = if line_of(ctx.text, &k).is_some() { k.clone() } else { k.replace('_', "-") };
            return Err(ctx.err(&token, format!("{section}: unknown key {k} (allowed: {})", allowed.join(", "))));
        }
    }
    Ok(())
}

fn preprocessing_from(ctx: &Ctx, m: &Mapping) -> Result<PreprocessingConfig, ConfigError> {
    check_keys(ctx, m, &["data_source", "queue", "split"], "preprocessing")?;
    let steps = named_items(ctx, m.get("queue").unwrap_or(&Value::Null), "queue")?
        .into_iter()
        .map(|(name, params)| parse_step(ctx, &name, params))
        .collect::<Result<Vec<_>, _>>()?;
    let queue = PreprocessingQueue::new(steps).map_err(|e| ctx.err("queue", e.to_string()))?;
    let split: SplitFractions = match m.get("split") {
        Some(v) => serde_yaml::from_value(v.clone()).map_err(|e| ctx.yaml(e))?,
        None => SplitFractions::default(),
    };
    split.validate().map_err(|e| ctx.err("split", e))?;
    Ok(PreprocessingConfig {
        data_source: string_field(ctx, m, "data_source")?,
        queue,
        split,
    })
}

fn features_from(ctx: &Ctx, m: &Mapping) -> Result<FeatureConfig, ConfigError> {
    check_keys(ctx, m, &["data_source", "data_multiplication", "features", "standardization"], "features")?;
    let features = named_items(ctx, m.get("features").unwrap_or(&Value::Null), "features")?
        .into_iter()
        .map(|(name, params)| parse_feature(ctx, &name, params))
        .collect::<Result<Vec<_>, _>>()?;
    validate_features(&features).map_err(|e| ctx.err("features", e.to_string()))?;
    let data_multiplication = named_items(
        ctx,
        m.get("data_multiplication").unwrap_or(&Value::Null),
        "data_multiplication",
    )?
    .into_iter()
    .map(|(name, params)| parse_augmentation(ctx, &name, params))
    .collect::<Result<Vec<_>, _>>()?;
    let standardization = match m.get("standardization") {
        Some(v) => serde_yaml::from_value(v.clone()).map_err(|e| ctx.yaml(e))?,
        None => StandardizationMode::default(),
    };
    Ok(FeatureConfig {
        data_source: string_field(ctx, m, "data_source")?,
        data_multiplication,
        features,
        standardization,
    })
}

fn model_from(ctx: &Ctx, m: &Mapping) -> Result<ModelConfig, ConfigError> {
    check_keys(ctx, m, &["data_source", "model", "training", "equivalences"], "model")?;
    let model = match m.get("model") {
        Some(Value::Mapping(mm)) => mm.clone(),
        _ => return Err(ctx.err("model", "model: missing `model` mapping with type and topology")),
    };
    check_keys(
        ctx,
        &model,
        &["type", "topology", "hidden_activation", "templates_per_symbol"],
        "model",
    )?;
    let kind = match string_field(ctx, &model, "type")?.as_deref() {
        Some("mlp") | None => {
            let topo = match model.get("topology") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => return Err(ctx.err("topology", "model: mlp needs a topology such as 167:500:500:369")),
            };
            let topology = parse_topology(&topo).map_err(|e| ctx.err("topology", e.to_string()))?;
            let hidden = match model.get("hidden_activation") {
                Some(v) => serde_yaml::from_value(v.clone()).map_err(|e| ctx.yaml(e))?,
                None => Activation::Sigmoid,
            };
            if hidden == Activation::Softmax {
                return Err(ctx.err("hidden", "model: softmax is only allowed in the output layer"));
            }
            ModelKind::Mlp { topology, hidden }
        }
        Some("gtw") => ModelKind::Gtw {
            templates_per_symbol: match model.get("templates_per_symbol") {
                Some(v) => v
                    .as_u64()
                    .ok_or_else(|| ctx.err("templates", "templates_per_symbol must be an integer"))?
                    as usize,
                None => crate::gtw::DEFAULT_TEMPLATES_PER_SYMBOL,
            },
        },
        Some(other) => return Err(ctx.err(other, format!("model: unknown type {other} (known: mlp, gtw)"))),
    };
    let training = match m.get("training") {
        None | Some(Value::Null) => TrainingSection::default(),
        Some(Value::String(cmd)) => {
            TrainingSection::from_command_template(cmd).map_err(|e| ctx.err("training", e))?
        }
        Some(v) => serde_yaml::from_value(v.clone()).map_err(|e| ctx.yaml(e))?,
    };
    if training.l1 > 0.0 && training.l2 > 0.0 {
        return Err(ctx.err("training", "training: choose either l1 or l2"));
    }
    training
        .train_config(0)
        .validate()
        .map_err(|e| ctx.err("training", e.to_string()))?;
    Ok(ModelConfig {
        data_source: string_field(ctx, m, "data_source")?,
        kind,
        training,
        equivalences: string_field(ctx, m, "equivalences")?,
    })
}

pub fn parse_preprocessing(text: &str) -> Result<PreprocessingConfig, ConfigError> {
    let ctx = Ctx { text };
    preprocessing_from(&ctx, &parse_root(text)?)
}

pub fn parse_features(text: &str) -> Result<FeatureConfig, ConfigError> {
    let ctx = Ctx { text };
    features_from(&ctx, &parse_root(text)?)
}

pub fn parse_model(text: &str) -> Result<ModelConfig, ConfigError> {
    let ctx = Ctx { text };
    model_from(&ctx, &parse_root(text)?)
}

/// A single file with `preprocessing`, `features` and `model` sections and an
/// optional `seed`.
pub fn parse_experiment(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let ctx = Ctx { text };
    let root = parse_root(text)?;
    check_keys(&ctx, &root, &["seed", "preprocessing", "features", "model"], "experiment")?;
    let section = |key: &str| -> Result<Mapping, ConfigError> {
        match root.get(key) {
            Some(Value::Mapping(m)) => Ok(m.clone()),
            _ => Err(ctx.err(key, format!("experiment: missing section {key}"))),
        }
    };
    let seed = match root.get("seed") {
        None => 0,
        Some(v) => v.as_u64().ok_or_else(|| ctx.err("seed", "seed must be a non-negative integer"))?,
    };
    let config = ExperimentConfig {
        seed,
        preprocessing: preprocessing_from(&ctx, &section("preprocessing")?)?,
        features: features_from(&ctx, &section("features")?)?,
        model: model_from(&ctx, &section("model")?)?,
    };
    if let ModelKind::Mlp { topology, .. } = &config.model.kind {
        let dim = total_dimension(&config.features.features);
        if topology[0] != dim {
            return Err(ctx.err(
                "topology",
                format!("topology input width {} does not match the {dim} features", topology[0]),
            ));
        }
    }
    Ok(config)
}

fn with_file<T>(path: &Path, r: Result<T, ConfigError>) -> Result<T, ConfigError> {
    r.map_err(|mut e| {
        e.file = Some(path.to_path_buf());
        e
    })
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError {
        file: Some(path.to_path_buf()),
        line: None,
        message: e.to_string(),
    })
}

pub fn load_preprocessing(path: &Path) -> Result<PreprocessingConfig, ConfigError> {
    with_file(path, parse_preprocessing(&read(path)?))
}

pub fn load_features(path: &Path) -> Result<FeatureConfig, ConfigError> {
    with_file(path, parse_features(&read(path)?))
}

pub fn load_model(path: &Path) -> Result<ModelConfig, ConfigError> {
    with_file(path, parse_model(&read(path)?))
}

pub fn load_experiment(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    with_file(path, parse_experiment(&read(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const PREPROCESSING_LISTING: &str = "\
data-source: archive/raw-datasets/2014-08-26-20-14-handwriting_datasets-raw.pickle
queue:
  - RemoveDuplicateTime: null
  - StrokeConnect:
    - minimum_distance: 10
  - ScaleAndShift:
    - max_width: 1.0
    - max_height: 1.0
    - center: true
  - SpaceEvenlyPerStroke:
    - kind: linear
    - number: 20
  - ScaleAndShift:
    - max_width: 1.0
    - max_height: 1.0
    - center: true
";

    const FEATURE_LISTING: &str = "\
data-source: archive/preprocessed/c2
data-multiplication:
  - Multiply:
    - nr: 1
features:
  - ConstantPointCoordinates:
    - strokes: 4
    - points_per_stroke: 20
    - fill_empty_with: 0
    - pen_down: false
  - ReCurvature:
    - strokes: 4
  - Ink: null
  - StrokeCount: null
  - AspectRatio: null
";

    const MODEL_LISTING: &str = "\
data-source: archive/feature-files/c2
training: '{{nntoolkit}} train --epochs 1000 --learning-rate 0.1
  --momentum 0.1
  {{training}} {{validation}}
  {{testing}} < {{src_model}} > {{target_model}} 2>> {{target_model}}.log'
model:
  type: mlp
  topology: 167:500:500:369
";

    #[test]
    fn preprocessing_listing() {
        let cfg = parse_preprocessing(PREPROCESSING_LISTING).unwrap();
        let steps = cfg.queue.steps();
        assert_eq!(steps.len(), 5);
        assert_eq!(steps[0], PreprocessingStep::RemoveDuplicateTime);
        assert_eq!(steps[1], PreprocessingStep::StrokeConnect { minimum_distance: 10.0 });
        assert_eq!(steps[2], PreprocessingStep::scale_and_shift(ShiftVariant::I1));
        assert_eq!(steps[2], steps[4]);
        assert_eq!(
            steps[3],
            PreprocessingStep::SpaceEvenlyPerStroke {
                number: 20,
                kind: Interpolation::Linear
            }
        );
        assert_eq!(
            cfg.data_source.as_deref(),
            Some("archive/raw-datasets/2014-08-26-20-14-handwriting_datasets-raw.pickle")
        );
    }

    #[test]
    fn feature_listing() {
        let cfg = parse_features(FEATURE_LISTING).unwrap();
        assert_eq!(total_dimension(&cfg.features), 167);
        assert_eq!(cfg.features, crate::features::optimized_features());
        assert_eq!(cfg.data_multiplication, vec![AugmentationStep::Multiply { nr: 1 }]);
    }

    #[test]
    fn model_listing() {
        let cfg = parse_model(MODEL_LISTING).unwrap();
        assert_eq!(
            cfg.kind,
            ModelKind::Mlp {
                topology: vec![167, 500, 500, 369],
                hidden: Activation::Sigmoid
            }
        );
        assert_eq!((cfg.training.epochs, cfg.training.learning_rate, cfg.training.momentum), (1000, 0.1, 0.1));
    }

    #[test]
    fn structured_training_section() {
        let cfg = parse_model(
            "model: {type: mlp, topology: '4:3:2', hidden-activation: tanh}\n\
             training:\n  epochs: 5\n  schedule: newbob\n  l2: 0.0001\n  pretraining: dae\n  dae: {corruption: 0.3, learning_rate: 0.001, l2: 0.0001}\n",
        )
        .unwrap();
        let t = cfg.training.train_config(3);
        assert_eq!(t.regularization, Regularization::L2(1e-4));
        assert!(matches!(t.schedule, Schedule::Newbob(_)));
        assert_eq!(cfg.training.pretraining, Pretraining::Dae);
        assert_eq!(cfg.training.dae.corruption, 0.3);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_step = "queue:\n  - RemoveDuplicateTime: null\n  - Frobnicate: null\n";
        let e = parse_preprocessing(bad_step).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.message.contains("Frobnicate"));

        let bad_param = "queue:\n  - StrokeConnect:\n    - minimum_distance: 10\n    - radius: 3\n";
        let e = parse_preprocessing(bad_param).unwrap_err();
        assert_eq!(e.line, Some(4));

        let out_of_range = "queue:\n  - WeightedAverageSmoothing:\n    - theta: [0.5, 2.0, 0.5]\n";
        assert!(parse_preprocessing(out_of_range).is_err());

        let bad_feature = "features:\n  - Ink: null\n  - ConstantPointCoordinates:\n    - stroke: 4\n";
        let e = parse_features(bad_feature).unwrap_err();
        assert_eq!(e.line, Some(4), "{e}");

        let syntax = "queue:\n  - [unclosed\n";
        assert!(parse_preprocessing(syntax).unwrap_err().line.is_some());
        let e = parse_model("model:\n  type: mlp\n  topology: 167:x\n").unwrap_err();
        assert_eq!(e.line, Some(3));
    }

    #[test]
    fn experiment_requires_matching_topology() {
        let text = "\
seed: 4
preprocessing:
  queue: [RemoveDuplicateTime]
features:
  features: [Ink, StrokeCount]
model:
  model: {type: mlp, topology: '3:2'}
";
        let e = parse_experiment(text).unwrap_err();
        assert_eq!(e.line, Some(7));
        let ok = text.replace("'3:2'", "'2:2'");
        let cfg = parse_experiment(&ok).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.preprocessing.split, SplitFractions::default());
    }

    #[test]
    fn split_must_sum_to_one() {
        assert!(parse_preprocessing("split: {train: 0.5, validation: 0.1, test: 0.1}\n").is_err());
    }

    #[test]
    fn error_display_includes_file() {
        let e = ConfigError {
            file: Some(PathBuf::from("info.yml")),
            line: Some(3),
            message: "bad".into(),
        };
        assert_eq!(e.to_string(), "info.yml:3: bad");
    }
}

//! JSON model files.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{Activation, Layer, MlpError, MlpModel};
use crate::recording::SymbolTable;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    topology: Vec<usize>,
    layers: Vec<LayerFile>,
    symbols: SymbolTable,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerFile {
    activation: Activation,
    rows: usize,
    cols: usize,
    /// Row-major, bias row last.
    weights: Vec<f64>,
}

/// Serializes with shortest round-trip float formatting, so weights reload
/// bit for bit.
pub fn serialize_model(model: &MlpModel) -> Vec<u8> {
    let file = ModelFile {
        format_version: FORMAT_VERSION,
        topology: model.topology(),
        layers: model
            .layers
            .iter()
            .map(|l| LayerFile {
                activation: l.activation,
                rows: l.weights.nrows(),
                cols: l.weights.ncols(),
                weights: l.weights.iter().copied().collect(),
            })
            .collect(),
        symbols: model.symbols.clone(),
    };
    serde_json::to_vec(&file).expect("model serializes")
}

pub fn deserialize_model(bytes: &[u8]) -> Result<MlpModel, MlpError> {
    let value: serde_json::Value = serde_json::from_slice(bytes).map_err(|e| MlpError::Format(e.to_string()))?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        None => return Err(MlpError::Format("missing format_version".into())),
        Some(v) if v != u64::from(FORMAT_VERSION) => {
            return Err(MlpError::Format(format!("format_version {v}, expected {FORMAT_VERSION}")))
        }
        Some(_) => {}
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| MlpError::Format(e.to_string()))?;
    let layers = file
        .layers
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            if l.rows < 2 || l.cols == 0 {
                return Err(MlpError::Format(format!("layer {i} has shape {}x{}", l.rows, l.cols)));
            }
            let weights = Array2::from_shape_vec((l.rows, l.cols), l.weights).map_err(|_| {
                MlpError::Format(format!("layer {i}: weight count does not match {}x{}", l.rows, l.cols))
            })?;
            Ok(Layer {
                weights,
                activation: l.activation,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let model = MlpModel::new(layers, file.symbols).map_err(|e| MlpError::Format(e.to_string()))?;
    if model.topology() != file.topology {
        return Err(MlpError::Format(format!(
            "declared topology {:?} does not match layers {:?}",
            file.topology,
            model.topology()
        )));
    }
    Ok(model)
}

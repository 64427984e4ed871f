//! Multilayer perceptron: model, training, pretraining and persistence.
//!
//! Each layer holds an `(n_in + 1) x n_out` weight matrix whose last row is the
//! bias; inputs are extended by a constant 1 before multiplication.

mod io;
mod pretrain;
mod train;

pub use io::{deserialize_model, serialize_model, FORMAT_VERSION};
pub use pretrain::{dae_pretrain, mask_noise, slp_pretrain, DaeConfig, DaeReport};
pub use train::{
    ce_loss, classification_error, gradients, objective, penalty, train, train_step, Dataset,
    EpochRecord, History, Loss, NewbobConfig, Regularization, Schedule, StepState, Targets,
    TrainConfig,
};

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recording::{ClassificationResult, Hypothesis, SymbolTable};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("expected {expected} inputs, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error("training: {0}")]
    Training(String),
    #[error("non-finite weight update in epoch {epoch}, layer {layer}")]
    NonFinite { epoch: usize, layer: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Softmax,
    Linear,
}

impl Activation {
    /// Applies the activation to each row of pre-activations.
    pub fn apply(self, z: &mut Array2<f64>) {
        match self {
            Activation::Sigmoid => z.mapv_inplace(|v| 1.0 / (1.0 + (-v).exp())),
            Activation::Tanh => z.mapv_inplace(f64::tanh),
            Activation::Linear => {}
            Activation::Softmax => {
                for mut row in z.rows_mut() {
                    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    row.mapv_inplace(|v| (v - max).exp());
                    let sum = row.sum();
                    row.mapv_inplace(|v| v / sum);
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation, written in terms of the
    /// output `o`. Not defined for softmax.
    pub fn derivative_from_output(self, o: f64) -> f64 {
        match self {
            Activation::Sigmoid => o * (1.0 - o),
            Activation::Tanh => 1.0 - o * o,
            Activation::Linear => 1.0,
            Activation::Softmax => panic!("softmax derivative is handled with the loss"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn n_in(&self) -> usize {
        self.weights.nrows() - 1
    }

    pub fn n_out(&self) -> usize {
        self.weights.ncols()
    }

    /// Pre-activations `[x, 1] W` for a batch of row vectors.
    pub fn pre_activation(&self, x: &Array2<f64>) -> Array2<f64> {
        let n_in = self.n_in();
        let mut z = x.dot(&self.weights.slice(s![..n_in, ..]));
        z += &self.weights.row(n_in);
        z
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = self.pre_activation(x);
        self.activation.apply(&mut z);
        z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub symbols: SymbolTable,
}

/// Parses `"167:500:500:369"`.
pub fn parse_topology(text: &str) -> Result<Vec<usize>, MlpError> {
    let widths = text
        .split(':')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|_| MlpError::Topology(format!("{text:?}: {w:?} is not a layer width")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    check_topology(&widths)?;
    Ok(widths)
}

pub fn format_topology(widths: &[usize]) -> String {
    widths.iter().map(usize::to_string).collect::<Vec<_>>().join(":")
}

fn check_topology(widths: &[usize]) -> Result<(), MlpError> {
    if widths.len() < 2 {
        return Err(MlpError::Topology(format!(
            "{} needs at least an input and an output width",
            format_topology(widths)
        )));
    }
    if widths.contains(&0) {
        return Err(MlpError::Topology(format!("{} has a zero width", format_topology(widths))));
    }
    Ok(())
}

/// Half-width of the uniform initialization interval between layers of
/// widths `n_in` and `n_out`.
pub fn init_bound(n_in: usize, n_out: usize) -> f64 {
    4.0 * (6.0 / (n_in + n_out) as f64).sqrt()
}

/// Weights for one layer drawn from `U(-b, b)`, bias row zero.
pub fn init_layer(n_in: usize, n_out: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Layer {
    let bound = init_bound(n_in, n_out);
    let dist = Uniform::new_inclusive(-bound, bound);
    let mut weights = Array2::zeros((n_in + 1, n_out));
    for v in weights.slice_mut(s![..n_in, ..]).iter_mut() {
        *v = dist.sample(rng);
    }
    Layer { weights, activation }
}

/// Random model with `hidden` activations and a softmax output layer.
pub fn init_model(
    topology: &[usize],
    hidden: Activation,
    symbols: SymbolTable,
    seed: u64,
) -> Result<MlpModel, MlpError> {
    check_topology(topology)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = topology.len() - 2;
    let layers = topology
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let act = if i == last { Activation::Softmax } else { hidden };
            init_layer(w[0], w[1], act, &mut rng)
        })
        .collect();
    MlpModel::new(layers, symbols)
}

impl MlpModel {
    pub fn new(layers: Vec<Layer>, symbols: SymbolTable) -> Result<Self, MlpError> {
        if layers.is_empty() {
            return Err(MlpError::Topology("model has no layers".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out() != pair[1].n_in() {
                return Err(MlpError::Topology(format!(
                    "layer {i} has {} outputs but layer {} takes {} inputs",
                    pair[0].n_out(),
                    i + 1,
                    pair[1].n_in()
                )));
            }
        }
        if let Some(i) = layers[..layers.len() - 1]
            .iter()
            .position(|l| l.activation == Activation::Softmax)
        {
            return Err(MlpError::Topology(format!("softmax in hidden layer {i}")));
        }
        let out = layers[layers.len() - 1].n_out();
        if out != symbols.len() {
            return Err(MlpError::Topology(format!(
                "{out} output neurons for {} symbols",
                symbols.len()
            )));
        }
        if layers.iter().any(|l| l.weights.iter().any(|w| !w.is_finite())) {
            return Err(MlpError::Format("non-finite weight".into()));
        }
        Ok(MlpModel { layers, symbols })
    }

    pub fn topology(&self) -> Vec<usize> {
        let mut t = vec![self.layers[0].n_in()];
        t.extend(self.layers.iter().map(Layer::n_out));
        t
    }

    pub fn feature_dim(&self) -> usize {
        self.layers[0].n_in()
    }

    /// Outputs of every layer for a batch: `[x, o_1, ..., o_L]`.
    pub fn forward_all(&self, x: &Array2<f64>) -> Vec<Array2<f64>> {
        let mut outs = Vec::with_capacity(self.layers.len() + 1);
        outs.push(x.clone());
        for layer in &self.layers {
            let next = layer.forward(outs.last().expect("non-empty"));
            outs.push(next);
        }
        outs
    }

    pub fn forward_batch(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut cur = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            cur = layer.forward(&cur);
        }
        cur
    }

    pub fn forward(&self, x: &[f64]) -> Result<Array1<f64>, MlpError> {
        if x.len() != self.feature_dim() {
            return Err(MlpError::Dimension {
                expected: self.feature_dim(),
                got: x.len(),
            });
        }
        let batch = ArrayView1::from(x).insert_axis(Axis(0)).to_owned();
        Ok(self.forward_batch(&batch).row(0).to_owned())
    }

    /// The `k` most probable symbols, descending, ties by ascending id.
    pub fn predict_topk(&self, x: &[f64], k: usize) -> Result<ClassificationResult, MlpError> {
        let o = self.forward(x)?;
        Ok(top_k(&self.symbols, o.as_slice().expect("contiguous"), k))
    }
}

/// Ranks output-neuron probabilities.
pub fn top_k(symbols: &SymbolTable, probs: &[f64], k: usize) -> ClassificationResult {
    let mut ranked: Vec<Hypothesis> = probs
        .iter()
        .enumerate()
        .map(|(i, &p)| Hypothesis {
            symbol: symbols.id_at(i).expect("one symbol per output"),
            probability: p,
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then(a.symbol.cmp(&b.symbol))
    });
    ranked.truncate(k);
    ranked
}

//! Supervised layer-wise pretraining and denoising auto-encoders.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::train::{gather, train, Dataset, History, Loss, Regularization, StepState, TrainConfig};
use super::{check_topology, init_layer, init_model, train_step, Activation, Layer, MlpError, MlpModel};
use crate::recording::SymbolTable;

/// Grows the network one hidden layer at a time. Stage `s` keeps the hidden
/// layers trained so far, appends a fresh hidden layer and a fresh output
/// layer, and trains the whole stack for `config.epochs` epochs.
///
/// Stage 1 starts from `init_model` with `config.seed`, so a single hidden
/// layer gives exactly the plain training result. `on_stage_start` sees each
/// stage's model before it is trained.
pub fn slp_pretrain(
    topology: &[usize],
    hidden: Activation,
    symbols: SymbolTable,
    train_set: &Dataset,
    valid: Option<&Dataset>,
    config: &TrainConfig,
    on_stage_start: &mut dyn FnMut(usize, &MlpModel),
) -> Result<(MlpModel, Vec<History>), MlpError> {
    check_topology(topology)?;
    let n_hidden = topology.len() - 2;
    let out = topology[topology.len() - 1];
    let first: Vec<usize> = if n_hidden == 0 {
        topology.to_vec()
    } else {
        vec![topology[0], topology[1], out]
    };
    let mut model = init_model(&first, hidden, symbols.clone(), config.seed)?;
    let mut histories = Vec::new();
    for stage in 1..=n_hidden.max(1) {
        if stage > 1 {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(stage as u64 - 1));
            let mut layers = model.layers;
            layers.pop();
            let (h_in, h_out) = (topology[stage - 1], topology[stage]);
            layers.push(init_layer(h_in, h_out, hidden, &mut rng));
            layers.push(init_layer(h_out, out, Activation::Softmax, &mut rng));
            model = MlpModel::new(layers, symbols.clone())?;
        }
        on_stage_start(stage, &model);
        let (trained, history) = train(model, train_set, valid, config)?;
        tracing::info!(stage, epochs = history.epochs_trained(), "pretraining stage done");
        model = trained;
        histories.push(history);
    }
    Ok((model, histories))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DaeConfig {
    /// Probability that an input component is zeroed.
    pub corruption: f64,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Epochs per auto-encoder.
    pub epochs: usize,
    pub l2: f64,
    pub seed: u64,
    /// Encoder activation of the first hidden layer.
    pub first_activation: Activation,
    /// Encoder activation of the remaining hidden layers.
    pub hidden_activation: Activation,
}

impl Default for DaeConfig {
    fn default() -> Self {
        DaeConfig {
            corruption: 0.3,
            learning_rate: 0.001,
            momentum: 0.1,
            batch_size: 256,
            epochs: 1000,
            l2: 1e-4,
            seed: 0,
            first_activation: Activation::Tanh,
            hidden_activation: Activation::Sigmoid,
        }
    }
}

/// Mean reconstruction error on clean inputs, per hidden layer and epoch
/// (epoch 0 before training).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DaeReport {
    pub reconstruction: Vec<Vec<f64>>,
}

/// Copy of `x` with each component zeroed independently with probability
/// `corruption`.
pub fn mask_noise(x: &Array2<f64>, corruption: f64, rng: &mut impl Rng) -> Array2<f64> {
    x.mapv(|v| if rng.gen_bool(corruption) { 0.0 } else { v })
}

fn reconstruction_error(ae: &MlpModel, x: &Array2<f64>) -> f64 {
    let o = ae.forward_batch(x);
    let sq: f64 = o.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
    0.5 * sq / x.nrows() as f64
}

/// Stacked denoising auto-encoder pretraining. Hidden layer `k` is the
/// encoder of an auto-encoder with a linear decoder, trained with MSE on the
/// masked outputs of layers `0..k`. The output layer is random.
pub fn dae_pretrain(
    topology: &[usize],
    symbols: SymbolTable,
    x: &Array2<f64>,
    config: &DaeConfig,
) -> Result<(MlpModel, DaeReport), MlpError> {
    check_topology(topology)?;
    if !(0.0..1.0).contains(&config.corruption) {
        return Err(MlpError::Training(format!("corruption {} outside [0, 1)", config.corruption)));
    }
    if config.batch_size == 0 {
        return Err(MlpError::Training("batch size must be at least 1".into()));
    }
    if x.nrows() == 0 {
        return Err(MlpError::Training("no pretraining data".into()));
    }
    if x.ncols() != topology[0] {
        return Err(MlpError::Dimension {
            expected: topology[0],
            got: x.ncols(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut encoders: Vec<Layer> = Vec::new();
    let mut report = DaeReport::default();
    let mut input = x.clone();
    let reg = Regularization::L2(config.l2);
    for k in 0..topology.len() - 2 {
        let (n_in, n_hidden) = (topology[k], topology[k + 1]);
        let act = if k == 0 {
            config.first_activation
        } else {
            config.hidden_activation
        };
        if act == Activation::Softmax {
            return Err(MlpError::Topology("softmax encoder".into()));
        }
        let layers = vec![
            init_layer(n_in, n_hidden, act, &mut rng),
            init_layer(n_hidden, n_in, Activation::Linear, &mut rng),
        ];
        let mut ae = MlpModel::new(layers, SymbolTable::anonymous(n_in))?;
        let mut errors = vec![reconstruction_error(&ae, &input)];
        let mut state = StepState::default();
        let mut order: Vec<usize> = (0..input.nrows()).collect();
        for epoch in 1..=config.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(config.batch_size) {
                let clean = gather(&input, chunk);
                let noisy = mask_noise(&clean, config.corruption, &mut rng);
                train_step(
                    &mut ae,
                    &noisy,
                    &clean,
                    Loss::Mse,
                    config.learning_rate,
                    config.momentum,
                    reg,
                    &mut state,
                    epoch,
                )?;
            }
            errors.push(reconstruction_error(&ae, &input));
        }
        tracing::info!(layer = k, error = errors[errors.len() - 1], "auto-encoder trained");
        let encoder = ae.layers.swap_remove(0);
        input = encoder.forward(&input);
        encoders.push(encoder);
        report.reconstruction.push(errors);
    }
    let h = topology[topology.len() - 2];
    let out = topology[topology.len() - 1];
    encoders.push(init_layer(h, out, Activation::Softmax, &mut rng));
    Ok((MlpModel::new(encoders, symbols)?, report))
}

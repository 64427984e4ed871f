//! Gradient descent with momentum, mini-batches and the newbob schedule.

use std::fmt::Write as _;

use ndarray::{s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Activation, MlpError, MlpModel};

const CLAMP: f64 = 1e-12;

/// Objective whose gradient drives training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Softmax output: mean negative log-likelihood, output delta `o - y`.
    /// Sigmoid output: mean of the per-unit binary cross entropy, same delta.
    CrossEntropy,
    /// Half the squared error, batch mean.
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularization {
    #[default]
    None,
    L1(f64),
    L2(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewbobConfig {
    /// Factor applied to the learning rate.
    pub decay: f64,
    /// Improvement (percentage points of validation error) below which
    /// decaying starts.
    pub threshold: f64,
    /// Improvement below which training stops once decaying has started.
    pub stop_threshold: f64,
    /// Measure improvement relative to the previous error instead of in
    /// absolute percentage points.
    pub relative: bool,
}

impl Default for NewbobConfig {
    fn default() -> Self {
        NewbobConfig {
            decay: 0.5,
            threshold: 0.5,
            stop_threshold: 0.5,
            relative: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    FixedEpochs,
    Newbob(NewbobConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Upper bound on epochs; exact count for [`Schedule::FixedEpochs`].
    pub epochs: usize,
    pub schedule: Schedule,
    pub regularization: Regularization,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            momentum: 0.1,
            batch_size: 256,
            epochs: 1000,
            schedule: Schedule::FixedEpochs,
            regularization: Regularization::None,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: String| Err(MlpError::Training(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be non-negative", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1]", self.momentum));
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        match self.regularization {
            Regularization::L1(l) | Regularization::L2(l) if !(l >= 0.0) => {
                bad(format!("regularization weight {l} must be non-negative"))
            }
            _ => Ok(()),
        }
    }
}

/// Feature rows with class indices into the model's symbol table.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, labels: Vec<usize>) -> Self {
        assert_eq!(x.nrows(), labels.len(), "one label per row");
        Dataset { x, labels }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn one_hot(&self, classes: usize) -> Array2<f64> {
        one_hot(&self.labels, classes)
    }
}

pub(crate) fn one_hot(labels: &[usize], classes: usize) -> Array2<f64> {
    let mut y = Array2::zeros((labels.len(), classes));
    for (r, &c) in labels.iter().enumerate() {
        y[[r, c]] = 1.0;
    }
    y
}

/// Training targets for a batch source.
#[derive(Debug, Clone, Copy)]
pub enum Targets<'a> {
    Classes(&'a [usize]),
    Values(&'a Array2<f64>),
}

/// Cross entropy summed over the batch, per example
/// `-sum_k (y_k log o_k + (1 - y_k) log(1 - o_k))`, with outputs clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn ce_loss(model: &MlpModel, x: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let o = model.forward_batch(x);
    o.iter()
        .zip(y.iter())
        .map(|(&o, &y)| {
            let o = o.clamp(CLAMP, 1.0 - CLAMP);
            -(y * o.ln() + (1.0 - y) * (1.0 - o).ln())
        })
        .sum()
}

/// Regularization term added to the objective. Bias rows are exempt.
pub fn penalty(model: &MlpModel, reg: Regularization) -> f64 {
    let weights = || {
        model
            .layers
            .iter()
            .flat_map(|l| l.weights.slice(s![..l.n_in(), ..]).into_iter().copied().collect::<Vec<_>>())
    };
    match reg {
        Regularization::None => 0.0,
        Regularization::L1(lambda) => lambda * weights().map(f64::abs).sum::<f64>(),
        Regularization::L2(lambda) => lambda * weights().map(|w| w * w).sum::<f64>(),
    }
}

fn check_loss(model: &MlpModel, loss: Loss) -> Result<(), MlpError> {
    let act = model.layers[model.layers.len() - 1].activation;
    match (loss, act) {
        (Loss::CrossEntropy, Activation::Softmax | Activation::Sigmoid) => Ok(()),
        (Loss::Mse, a) if a != Activation::Softmax => Ok(()),
        _ => Err(MlpError::Training(format!("{loss:?} loss with {act:?} output layer"))),
    }
}

/// The batch-mean objective that [`gradients`] differentiates, including the
/// regularization term.
pub fn objective(model: &MlpModel, x: &Array2<f64>, y: &Array2<f64>, loss: Loss, reg: Regularization) -> f64 {
    let o = model.forward_batch(x);
    let b = x.nrows() as f64;
    let softmax = model.layers[model.layers.len() - 1].activation == Activation::Softmax;
    let data: f64 = match loss {
        Loss::CrossEntropy if softmax => o.iter().zip(y).map(|(&o, &y)| -y * o.ln()).sum(),
        Loss::CrossEntropy => o
            .iter()
            .zip(y)
            .map(|(&o, &y)| -(y * o.ln() + (1.0 - y) * (1.0 - o).ln()))
            .sum(),
        Loss::Mse => o.iter().zip(y).map(|(&o, &y)| 0.5 * (o - y) * (o - y)).sum(),
    };
    data / b + penalty(model, reg)
}

/// Gradients of [`objective`] with respect to every weight matrix, from the
/// layer-wise delta recursion.
pub fn gradients(
    model: &MlpModel,
    x: &Array2<f64>,
    y: &Array2<f64>,
    loss: Loss,
    reg: Regularization,
) -> Result<Vec<Array2<f64>>, MlpError> {
    check_loss(model, loss)?;
    let outs = model.forward_all(x);
    let n_layers = model.layers.len();
    let b = x.nrows() as f64;
    let out_act = model.layers[n_layers - 1].activation;
    let mut dz = &outs[n_layers] - y;
    if loss == Loss::Mse {
        dz.zip_mut_with(&outs[n_layers], |d, &o| *d *= out_act.derivative_from_output(o));
    }
    dz /= b;
    let mut grads = vec![Array2::zeros((0, 0)); n_layers];
    for l in (0..n_layers).rev() {
        let layer = &model.layers[l];
        let n_in = layer.n_in();
        let w = layer.weights.slice(s![..n_in, ..]);
        let mut g = Array2::zeros(layer.weights.dim());
        g.slice_mut(s![..n_in, ..]).assign(&outs[l].t().dot(&dz));
        g.row_mut(n_in).assign(&dz.sum_axis(Axis(0)));
        match reg {
            Regularization::None => {}
            Regularization::L1(lambda) => {
                g.slice_mut(s![..n_in, ..]).zip_mut_with(&w, |gv, &wv| *gv += lambda * sign(wv));
            }
            Regularization::L2(lambda) => {
                g.slice_mut(s![..n_in, ..]).zip_mut_with(&w, |gv, &wv| *gv += 2.0 * lambda * wv);
            }
        }
        if l > 0 {
            let act = model.layers[l - 1].activation;
            let mut prev = dz.dot(&w.t());
            prev.zip_mut_with(&outs[l], |d, &o| *d *= act.derivative_from_output(o));
            dz = prev;
        }
        grads[l] = g;
    }
    Ok(grads)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Previous weight changes, for momentum.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepState {
    pub deltas: Vec<Array2<f64>>,
}

/// One update `dw = -eta * grad + momentum * dw_prev` on a batch.
#[allow(clippy::too_many_arguments)]
pub fn train_step(
    model: &mut MlpModel,
    x: &Array2<f64>,
    y: &Array2<f64>,
    loss: Loss,
    eta: f64,
    momentum: f64,
    reg: Regularization,
    state: &mut StepState,
    epoch: usize,
) -> Result<(), MlpError> {
    let grads = gradients(model, x, y, loss, reg)?;
    if state.deltas.len() != grads.len() {
        state.deltas = grads.iter().map(|g| Array2::zeros(g.dim())).collect();
    }
    for (l, ((layer, g), prev)) in model
        .layers
        .iter_mut()
        .zip(&grads)
        .zip(state.deltas.iter_mut())
        .enumerate()
    {
        let mut delta = g * (-eta);
        delta.scaled_add(momentum, prev);
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(MlpError::NonFinite { epoch, layer: l });
        }
        layer.weights += &delta;
        *prev = delta;
    }
    Ok(())
}

/// Fraction of rows whose arg-max output is not the label.
pub fn classification_error(model: &MlpModel, data: &Dataset) -> f64 {
    if data.is_empty() {
        return 0.0;
    }
    let o = model.forward_batch(&data.x);
    let wrong = o
        .rows()
        .into_iter()
        .zip(&data.labels)
        .filter(|(row, &label)| argmax(row.iter().copied()) != label)
        .count();
    wrong as f64 / data.len() as f64
}

pub(crate) fn argmax(it: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in it.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Learning rate used during this epoch.
    pub eta: f64,
    pub train_err: f64,
    pub valid_err: Option<f64>,
    /// Summed cross entropy on the training set, or mean reconstruction
    /// error for auto-encoders.
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    /// Epoch 0 is the state before training.
    pub records: Vec<EpochRecord>,
    pub stopped_early: bool,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,eta,train_err,valid_err,loss\n");
        for r in &self.records {
            let valid = r.valid_err.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", r.epoch, r.eta, r.train_err, valid, r.loss);
        }
        out
    }

    pub fn epochs_trained(&self) -> usize {
        self.records.len().saturating_sub(1)
    }
}

/// Rows of `x` in the given order as a new matrix.
pub(crate) fn gather(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(Axis(0), rows)
}

/// Trains a classifier. Mini-batches of `batch_size` (the last one may be
/// smaller) are drawn from a per-epoch shuffle seeded by `config.seed`.
pub fn train(
    mut model: MlpModel,
    train_set: &Dataset,
    valid: Option<&Dataset>,
    config: &TrainConfig,
) -> Result<(MlpModel, History), MlpError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(MlpError::Training("empty training set".into()));
    }
    if train_set.x.ncols() != model.feature_dim() {
        return Err(MlpError::Dimension {
            expected: model.feature_dim(),
            got: train_set.x.ncols(),
        });
    }
    let newbob = match config.schedule {
        Schedule::Newbob(nb) => {
            if valid.is_none_or(Dataset::is_empty) {
                return Err(MlpError::Training("newbob needs a validation set".into()));
            }
            Some(nb)
        }
        Schedule::FixedEpochs => None,
    };
    let classes = model.symbols.len();
    if let Some(&bad) = train_set.labels.iter().find(|&&l| l >= classes) {
        return Err(MlpError::Training(format!("label index {bad} for {classes} classes")));
    }
    let y_all = train_set.one_hot(classes);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = StepState::default();
    let mut eta = config.learning_rate;
    let mut history = History::default();

    let record = |model: &MlpModel, epoch: usize, eta: f64| EpochRecord {
        epoch,
        eta,
        train_err: classification_error(model, train_set),
        valid_err: valid.filter(|v| !v.is_empty()).map(|v| classification_error(model, v)),
        loss: ce_loss(model, &train_set.x, &y_all),
    };
    history.records.push(record(&model, 0, eta));
    let mut prev_err = history.records[0].valid_err.unwrap_or(0.0) * 100.0;
    let mut decaying = false;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(config.batch_size) {
            let xb = gather(&train_set.x, chunk);
            let yb = gather(&y_all, chunk);
            train_step(
                &mut model,
                &xb,
                &yb,
                Loss::CrossEntropy,
                eta,
                config.momentum,
                config.regularization,
                &mut state,
                epoch,
            )?;
        }
        let rec = record(&model, epoch, eta);
        tracing::debug!(epoch, eta, train_err = rec.train_err, valid_err = ?rec.valid_err, loss = rec.loss);
        let err = rec.valid_err.unwrap_or(0.0) * 100.0;
        history.records.push(rec);
        if let Some(nb) = newbob {
            let improvement = if nb.relative {
                if prev_err > 0.0 {
                    (prev_err - err) / prev_err * 100.0
                } else {
                    0.0
                }
            } else {
                prev_err - err
            };
            prev_err = err;
            if decaying {
                if improvement < nb.stop_threshold {
                    history.stopped_early = epoch < config.epochs;
                    break;
                }
                eta *= nb.decay;
            } else if improvement < nb.threshold {
                decaying = true;
                eta *= nb.decay;
            }
        }
    }
    Ok((model, history))
}

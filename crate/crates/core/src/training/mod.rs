//! Mini-batch Adam training loops and the per-fold experiment runner.

mod experiment;
mod pipeline;

pub use experiment::{
    run_fold, run_fold_audited, run_grid, test_representation, FitAudit, FitEvent, FitStage, FoldResult, Method,
    NoAudit, Representation,
};
pub use pipeline::{fit_pipeline, FittedPipeline, Pipeline, PIPELINE_MAGIC, PIPELINE_VERSION};

use std::time::Instant;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{Model, ModelKind, ModelSpec};
use crate::nn::{loss_bce, loss_mse, AdamConfig, AdamState, DenseLayer, ForwardCache, LayerGrads, Matrix};
use crate::rng::Rng;
use crate::scalar::Scalar;

const STREAM_AE_INIT: u64 = 0xAE01;
const STREAM_AE_ORDER: u64 = 0xAE02;
const STREAM_CLF_INIT: u64 = 0xC101;
const STREAM_CLF_ORDER: u64 = 0xC102;
const STREAM_CLF_DROPOUT: u64 = 0xC103;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub ae_epochs: usize,
    pub clf_epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle_each_epoch: bool,
    /// Train the autoencoder on label-0 training rows only.
    pub normal_only_ae: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            ae_epochs: 50,
            clf_epochs: 20,
            lr: 0.001,
            batch_size: 256,
            seed: 0,
            shuffle_each_epoch: true,
            normal_only_ae: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Validation("batch size must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Validation(format!("learning rate must be > 0, got {}", self.lr)));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Per-epoch record of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace {
    pub epoch_loss: Vec<f64>,
    pub epoch_seconds: Vec<f64>,
    /// [`Model::checksum`] of the returned parameters.
    pub checksum: String,
}

impl TrainTrace {
    pub fn epochs(&self) -> usize {
        self.epoch_loss.len()
    }
}

fn batch_order(rng: &mut Rng, n: usize, shuffle: bool) -> Vec<usize> {
    if shuffle {
        rng.permutation(n)
    } else {
        (0..n).collect()
    }
}

fn forward_train<T: Scalar>(
    layers: &[&DenseLayer<T>],
    x: Matrix<T>,
    rng: &mut Rng,
) -> Result<(Matrix<T>, Vec<ForwardCache<T>>)> {
    let mut caches = Vec::with_capacity(layers.len());
    let mut cur = x;
    for layer in layers {
        let mask = layer.train_mask(cur.rows(), rng)?;
        let (out, cache) = layer.forward_owned(cur, mask)?;
        caches.push(cache);
        cur = out;
    }
    Ok((cur, caches))
}

/// Backpropagates through `layers`. When `last_is_pre_activation` is set,
/// `grad` is taken w.r.t. the final layer's pre-activation rather than its output.
fn backprop<T: Scalar>(
    layers: &[&DenseLayer<T>],
    caches: &[ForwardCache<T>],
    grad: Matrix<T>,
    last_is_pre_activation: bool,
) -> Result<Vec<LayerGrads<T>>> {
    let mut grads: Vec<LayerGrads<T>> = Vec::with_capacity(layers.len());
    let mut upstream = grad;
    for (i, (layer, cache)) in layers.iter().zip(caches).enumerate().rev() {
        let pre = last_is_pre_activation && i == layers.len() - 1;
        let mut g = layer.backward_inner(cache, &upstream, pre, i > 0)?;
        upstream = std::mem::replace(&mut g.input, Matrix::zeros(0, 0));
        grads.push(g);
    }
    grads.reverse();
    Ok(grads)
}

fn apply_adam<T: Scalar>(model: &mut Model<T>, adam: &mut AdamState<T>, grads: &[LayerGrads<T>]) -> Result<()> {
    let flat: Vec<&[T]> = grads
        .iter()
        .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
        .collect();
    adam.step(&mut model.params_mut(), &flat)
}

fn finish_epoch(trace: &mut TrainTrace, total: f64, n: usize, started: Instant) -> Result<()> {
    let mean = total / n as f64;
    if !mean.is_finite() {
        return Err(Error::NonFinite(format!("epoch {} loss", trace.epoch_loss.len() + 1)));
    }
    trace.epoch_loss.push(mean);
    trace.epoch_seconds.push(started.elapsed().as_secs_f64());
    Ok(())
}

/// Fits an autoencoder to reconstruct `train` under MSE.
///
/// Features must already be Min-Max scaled: the sigmoid output cannot reach
/// targets outside `[0, 1]`.
pub fn train_autoencoder<T: Scalar>(
    spec: ModelSpec,
    train: &Dataset<T>,
    cfg: &TrainConfig,
) -> Result<(Model<T>, TrainTrace)> {
    cfg.validate()?;
    if !spec.kind.is_autoencoder() {
        return Err(Error::Kind("train_autoencoder needs an autoencoder spec".into()));
    }
    let x_all = train.features();
    if x_all.rows() == 0 {
        return Err(Error::Validation("cannot train on an empty dataset".into()));
    }
    if x_all.cols() != spec.input_dim {
        return Err(Error::dim("train_autoencoder", spec.input_dim, x_all.cols()));
    }
    if let Some(v) = x_all.as_slice().iter().find(|&&v| v < T::zero() || v > T::one()) {
        return Err(Error::Validation(format!(
            "feature value {v} outside [0, 1]; scale the data before training the autoencoder"
        )));
    }

    let root = Rng::new(cfg.seed);
    let mut model = Model::build(spec, &mut root.fork(STREAM_AE_INIT))?;
    let mut order_rng = root.fork(STREAM_AE_ORDER);
    // autoencoder layers carry no dropout, so this stream is never drawn from
    let mut unused = root.fork(0);
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &model.param_sizes())?;
    let n = x_all.rows();
    let mut trace = TrainTrace {
        epoch_loss: Vec::with_capacity(cfg.ae_epochs),
        epoch_seconds: Vec::with_capacity(cfg.ae_epochs),
        checksum: String::new(),
    };

    for _ in 0..cfg.ae_epochs {
        let started = Instant::now();
        let order = batch_order(&mut order_rng, n, cfg.shuffle_each_epoch);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = x_all.select_rows(batch);
            let grads = {
                let layers: Vec<&DenseLayer<T>> = model.layers().collect();
                let (out, caches) = forward_train(&layers, x.clone(), &mut unused)?;
                let (loss, grad) = loss_mse(&out, &x)?;
                total += loss.to_f64_lossless() * batch.len() as f64;
                backprop(&layers, &caches, grad, false)?
            };
            apply_adam(&mut model, &mut adam, &grads)?;
        }
        finish_epoch(&mut trace, total, n, started)?;
    }
    trace.checksum = model.checksum();
    Ok((model, trace))
}

/// Fits the expansion classifier with logit-space BCE. Dropout is active
/// during training only.
pub fn train_classifier<T: Scalar>(
    spec: ModelSpec,
    inputs: &Matrix<T>,
    labels: &[u8],
    cfg: &TrainConfig,
) -> Result<(Model<T>, TrainTrace)> {
    cfg.validate()?;
    if spec.kind != ModelKind::ExpansionClassifier {
        return Err(Error::Kind("train_classifier needs an expansion classifier spec".into()));
    }
    if inputs.cols() != spec.input_dim {
        return Err(Error::dim(
            "train_classifier",
            format!("{} input columns", spec.input_dim),
            format!("{} columns", inputs.cols()),
        ));
    }
    if labels.len() != inputs.rows() {
        return Err(Error::dim("train_classifier", format!("{} labels", inputs.rows()), labels.len()));
    }
    if inputs.rows() == 0 {
        return Err(Error::Validation("cannot train on an empty dataset".into()));
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Validation(format!("label {bad} not in {{0, 1}}")));
    }
    inputs.ensure_finite("classifier inputs")?;

    let root = Rng::new(cfg.seed);
    let mut model = Model::build(spec, &mut root.fork(STREAM_CLF_INIT))?;
    let mut order_rng = root.fork(STREAM_CLF_ORDER);
    let mut dropout_rng = root.fork(STREAM_CLF_DROPOUT);
    let mut adam = AdamState::new(AdamConfig::with_lr(cfg.lr), &model.param_sizes())?;
    let n = inputs.rows();
    let mut trace = TrainTrace {
        epoch_loss: Vec::with_capacity(cfg.clf_epochs),
        epoch_seconds: Vec::with_capacity(cfg.clf_epochs),
        checksum: String::new(),
    };

    let mut batch_labels = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.clf_epochs {
        let started = Instant::now();
        let order = batch_order(&mut order_rng, n, cfg.shuffle_each_epoch);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = inputs.select_rows(batch);
            batch_labels.clear();
            batch_labels.extend(batch.iter().map(|&i| labels[i]));
            let grads = {
                let layers: Vec<&DenseLayer<T>> = model.layers().collect();
                let (_, caches) = forward_train(&layers, x, &mut dropout_rng)?;
                let logits = caches.last().expect("classifier has layers").pre_activation();
                let (loss, grad) = loss_bce(logits.as_slice(), &batch_labels)?;
                total += loss.to_f64_lossless() * batch.len() as f64;
                let grad = Matrix::from_vec(batch.len(), 1, grad)?;
                backprop(&layers, &caches, grad, true)?
            };
            apply_adam(&mut model, &mut adam, &grads)?;
        }
        finish_epoch(&mut trace, total, n, started)?;
    }
    trace.checksum = model.checksum();
    Ok((model, trace))
}

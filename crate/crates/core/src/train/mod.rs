//! Loss, optimizer, early stopping, and the training loop.

mod adam;
mod checkpoint;
mod early_stop;
mod loss;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use early_stop::{early_stop_update, EarlyStopState};
pub use loss::{bce_grad, bce_loss, PROB_CLAMP};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::scalar::{sc, Scalar};
use crate::tensor::Tensor4;

/// One training example: a `(1, h, w, c)` input and its target (a scalar
/// `(1, 1, 1, 1)` label for classification, a `(1, h, w, 1)` mask for
/// segmentation).
#[derive(Debug, Clone)]
pub struct Sample<T> {
    pub input: Tensor4<T>,
    pub target: Tensor4<T>,
}

/// Hyperparameters for [`fit`].
#[derive(Debug, Clone)]
pub struct FitConfig<T> {
    pub learning_rate: T,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: T,
    pub shuffle_seed: u64,
}

impl<T: Scalar> FitConfig<T> {
    pub fn new(learning_rate: T) -> Self {
        Self {
            learning_rate,
            batch_size: 16,
            max_epochs: 100,
            patience: 10,
            min_delta: T::zero(),
            shuffle_seed: 0,
        }
    }
}

/// Per-epoch record written to training logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Outcome of a [`fit`] run.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub epochs: Vec<EpochLog>,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

/// One pass over `samples` in the order given by `order`, one optimizer step
/// per batch. Returns the mean training loss across batches.
pub fn train_epoch<T: Scalar>(
    model: &mut ModelParams<T>,
    samples: &[Sample<T>],
    order: &[usize],
    batch_size: usize,
    opt: &mut AdamState<T>,
) -> Result<T> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be >= 1".to_string()));
    }
    if samples.is_empty() {
        return Err(Error::Data("cannot train on an empty sample set".to_string()));
    }
    let mut total = T::zero();
    let mut batches = 0usize;
    for chunk in order.chunks(batch_size) {
        let inputs: Vec<Tensor4<T>> = chunk.iter().map(|&i| samples[i].input.clone()).collect();
        let targets: Vec<Tensor4<T>> = chunk.iter().map(|&i| samples[i].target.clone()).collect();
        let x = Tensor4::stack(&inputs)?;
        let t = Tensor4::stack(&targets)?;

        let (pred, cache) = model.forward_with_cache(&x)?;
        let loss = bce_loss(&pred, &t)?;
        if !loss.is_finite() {
            return Err(Error::Data(format!("non-finite training loss {loss}")));
        }
        let grad_pred = bce_grad(&pred, &t)?;
        let grads = model.backward(&cache, &grad_pred)?;

        let mut params = model.params_flat();
        adam_step(&mut params, &grads, opt)?;
        model.set_params_flat(&params)?;

        total = total + loss;
        batches += 1;
    }
    Ok(total / sc::<T>(batches as f64))
}

/// Mean loss over a sample set without touching parameters.
pub fn evaluate_loss<T: Scalar>(
    model: &ModelParams<T>,
    samples: &[Sample<T>],
    batch_size: usize,
) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::Data("cannot evaluate an empty sample set".to_string()));
    }
    let mut total = T::zero();
    let mut n_batches = 0usize;
    for chunk in samples.chunks(batch_size.max(1)) {
        let inputs: Vec<Tensor4<T>> = chunk.iter().map(|s| s.input.clone()).collect();
        let targets: Vec<Tensor4<T>> = chunk.iter().map(|s| s.target.clone()).collect();
        let pred = model.forward(&Tensor4::stack(&inputs)?)?;
        total = total + bce_loss(&pred, &Tensor4::stack(&targets)?)?;
        n_batches += 1;
    }
    Ok(total / sc::<T>(n_batches as f64))
}

/// Full training loop: shuffled epochs, Adam updates, early stopping on
/// validation loss, best-epoch weights restored at the end.
pub fn fit<T: Scalar>(
    model: &mut ModelParams<T>,
    train: &[Sample<T>],
    val: &[Sample<T>],
    cfg: &FitConfig<T>,
) -> Result<FitReport> {
    let mut opt = AdamState::new(model.count_params(), cfg.learning_rate);
    let mut stopper = EarlyStopState::new(cfg.patience, cfg.min_delta);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let mut best_params = model.params_flat();
    let mut best_val = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut epochs = Vec::new();
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let train_loss = train_epoch(model, train, &order, cfg.batch_size, &mut opt)?;
        let val_loss = evaluate_loss(model, val, cfg.batch_size)?;
        epochs.push(EpochLog {
            epoch,
            train_loss: train_loss.to_f64_lossy(),
            val_loss: val_loss.to_f64_lossy(),
        });
        if val_loss.to_f64_lossy() < best_val {
            best_val = val_loss.to_f64_lossy();
            best_epoch = epoch;
            best_params = model.params_flat();
        }
        let (_, stop) = early_stop_update(&mut stopper, val_loss)?;
        if stop {
            stopped_early = true;
            break;
        }
    }
    model.set_params_flat(&best_params)?;
    Ok(FitReport { epochs, best_val_loss: best_val, best_epoch, stopped_early })
}

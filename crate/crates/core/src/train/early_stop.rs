//! Validation-loss early stopping.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tracks the best validation loss and how long since it improved.
///
/// An epoch improves iff `val_loss < best - min_delta` (strict). Training
/// stops once `patience` consecutive epochs fail to improve.
#[derive(Debug, Clone)]
pub struct EarlyStopState<T> {
    best_val_loss: T,
    epochs_since_improvement: usize,
    patience: usize,
    min_delta: T,
}

impl<T: Scalar> EarlyStopState<T> {
    pub fn new(patience: usize, min_delta: T) -> Self {
        Self {
            best_val_loss: T::infinity(),
            epochs_since_improvement: 0,
            patience,
            min_delta,
        }
    }

    pub fn best_val_loss(&self) -> T {
        self.best_val_loss
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.epochs_since_improvement
    }
}

/// Feed one epoch's validation loss; returns the updated counter value and
/// whether training should stop now.
pub fn early_stop_update<T: Scalar>(state: &mut EarlyStopState<T>, val_loss: T) -> Result<(usize, bool)> {
    if !val_loss.is_finite() {
        return Err(Error::Data(format!("non-finite validation loss {val_loss}")));
    }
    if val_loss < state.best_val_loss - state.min_delta {
        state.best_val_loss = val_loss;
        state.epochs_since_improvement = 0;
    } else {
        state.epochs_since_improvement += 1;
    }
    Ok((state.epochs_since_improvement, state.epochs_since_improvement == state.patience))
}

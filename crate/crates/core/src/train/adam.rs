//! Adam optimizer over a flat parameter vector.

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};

/// Moment accumulators and hyperparameters for one parameter vector.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    step: u64,
    m: Vec<T>,
    v: Vec<T>,
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(n_params: usize, learning_rate: T) -> Self {
        Self {
            step: 0,
            m: vec![T::zero(); n_params],
            v: vec![T::zero(); n_params],
            learning_rate,
            beta1: sc(0.9),
            beta2: sc(0.999),
            epsilon: sc(1e-8),
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Scalar>(params: &mut [T], grads: &[T], state: &mut AdamState<T>) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape(format!(
            "adam_step: {} params, {} grads, state sized for {}",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.step += 1;
    let t = state.step as i32;
    let bc1 = T::one() - state.beta1.powi(t);
    let bc2 = T::one() - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (T::one() - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (T::one() - state.beta2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] = params[i] - state.learning_rate * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

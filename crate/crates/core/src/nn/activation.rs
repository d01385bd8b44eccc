//! Elementwise nonlinearities.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

/// The two activations the networks use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Relu => {
                if v > T::zero() {
                    v
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => T::one() / (T::one() + (-v).exp()),
        }
    }
}

/// Apply an activation elementwise.
pub fn activation<T: Scalar>(x: &Tensor4<T>, kind: Activation) -> Tensor4<T> {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = kind.apply(*v);
    }
    out
}

/// Gradient of [`activation`].
///
/// `cache` is the forward *input* for relu (subgradient 0 at exactly 0) and
/// the forward *output* for sigmoid (derivative `y * (1 - y)`).
pub fn activation_backward<T: Scalar>(
    kind: Activation,
    cache: &Tensor4<T>,
    grad_out: &Tensor4<T>,
) -> Result<Tensor4<T>> {
    if cache.shape() != grad_out.shape() {
        return Err(Error::shape(format!(
            "activation backward: cache {:?} vs grad_out {:?}",
            cache.shape(),
            grad_out.shape()
        )));
    }
    let mut out = grad_out.clone();
    match kind {
        Activation::Relu => {
            for (g, &x) in out.data_mut().iter_mut().zip(cache.data()) {
                if x <= T::zero() {
                    *g = T::zero();
                }
            }
        }
        Activation::Sigmoid => {
            for (g, &y) in out.data_mut().iter_mut().zip(cache.data()) {
                *g = *g * y * (T::one() - y);
            }
        }
    }
    Ok(out)
}

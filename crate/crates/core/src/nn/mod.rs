//! Layer primitives: numerically exact forward and backward passes for every
//! building block the two networks use.
//!
//! All ops are pure functions of their inputs and safe to call from many
//! threads at once.

mod activation;
mod conv;
mod dense;
mod kernel;
mod pool;

pub use activation::{activation, activation_backward, Activation};
pub use conv::{
    conv2d_backward, conv2d_forward, depthwise_backward, depthwise_forward, pointwise_backward,
    pointwise_forward, separable_backward, separable_forward, transposed_conv_backward,
    transposed_conv_forward,
};
pub use dense::{Dense, DenseGrad};
pub use kernel::{out_dim, pad_before, Kernel, KernelGrad, KernelKind, PadMode};
pub use pool::{
    maxpool_backward, maxpool_forward, upsample2x_nearest, upsample2x_nearest_backward, ArgmaxMap,
};

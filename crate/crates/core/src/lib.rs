//! Tri-planar ischemic stroke lesion detection and segmentation at desk scale.
//!
//! The toolkit covers the whole path: exact layer primitives with hand-derived
//! gradients ([`nn`]), a configurable slice classifier and residual U-shaped
//! segmenter ([`model`]), Adam/BCE training with early stopping ([`train`]),
//! 3D volume decomposition into axial/sagittal/coronal slice stacks
//! ([`volume`]), per-voxel unanimity voting across the planes ([`aggregate`]),
//! the classify-then-segment pipeline ([`pipeline`]), the evaluation metric
//! suite ([`metrics`]), and file I/O plus phantom data generation ([`io`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` for training and
//! inference, `f64` for gradient verification); the aliases below pin the two
//! concrete instantiations.

pub mod aggregate;
pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod scalar;
pub mod tensor;
pub mod train;
pub mod volume;

pub use error::{Error, Result};
pub use scalar::{sc, Scalar};

/// `f32` instantiations, the training/inference precision.
pub type Tensor4F32 = tensor::Tensor4<f32>;
pub type VolumeF32 = volume::Volume<f32>;
pub type ModelF32 = model::ModelParams<f32>;

/// `f64` instantiations, the gradient-verification precision.
pub type Tensor4F64 = tensor::Tensor4<f64>;
pub type VolumeF64 = volume::Volume<f64>;
pub type ModelF64 = model::ModelParams<f64>;

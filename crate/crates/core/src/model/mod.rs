//! Declarative network descriptions and their learned weights.
//!
//! [`ArchSpec`] is a small, human-editable description (TOML on disk) of
//! either network kind; [`build_classifier`] / [`build_segmenter`] realize it
//! with seeded weights, and [`ModelParams`] carries the weights with a flat
//! parameter view for the optimizer and the checkpoint format.

mod classifier;
mod segmenter;

pub use classifier::build_classifier;
pub use segmenter::build_segmenter;

pub(crate) use classifier::{ClassifierNet, ClsCache};
pub(crate) use segmenter::{SegCache, SegmenterNet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};
use crate::tensor::Tensor4;

/// Which of the two networks a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Classifier,
    Segmenter,
}

fn default_blocks() -> usize {
    1
}

fn default_kernel() -> usize {
    3
}

fn default_hidden() -> usize {
    64
}

fn default_true() -> bool {
    true
}

/// Declarative network description.
///
/// Classifier stages are `standard conv -> depthwise conv -> relu`, repeated
/// `blocks_per_stage` times, then max pool. Segmenter stages are
/// `standard conv -> relu -> separable conv -> relu` in a U-shaped
/// encoder/decoder with elementwise-add residual joins in the decoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub kind: ModelKind,
    /// Spatial dims every input slice is padded to.
    pub input_hw: (usize, usize),
    /// Channels per stage, strictly increasing.
    pub stage_channels: Vec<usize>,
    #[serde(default = "default_blocks")]
    pub blocks_per_stage: usize,
    /// Spatial size of every conv/depthwise filter.
    #[serde(default = "default_kernel")]
    pub kernel_size: usize,
    /// Max-pool (window, stride).
    pub pool: (usize, usize),
    /// Classifier only: second conv of each block is depthwise (true) or a
    /// second standard conv (false, for parameter comparisons).
    #[serde(default = "default_true")]
    pub use_depthwise: bool,
    /// Segmenter only: refinement convs are separable (true) or standard.
    #[serde(default = "default_true")]
    pub use_separable: bool,
    /// Segmenter only: elementwise-add encoder features into the decoder.
    #[serde(default = "default_true")]
    pub decoder_residual: bool,
    /// Classifier only: width of the hidden dense layer before the logit.
    #[serde(default = "default_hidden")]
    pub dense_hidden: usize,
}

impl ArchSpec {
    /// Classifier spec with the documented defaults (3x3 kernels, 2/2 pool).
    pub fn classifier(input_hw: (usize, usize), stage_channels: Vec<usize>) -> Result<Self> {
        let spec = Self {
            kind: ModelKind::Classifier,
            input_hw,
            stage_channels,
            blocks_per_stage: 1,
            kernel_size: 3,
            pool: (2, 2),
            use_depthwise: true,
            use_separable: true,
            decoder_residual: true,
            dense_hidden: 64,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Segmenter spec with the documented defaults (3x3 kernels, 3/2 pool).
    pub fn segmenter(input_hw: (usize, usize), stage_channels: Vec<usize>) -> Result<Self> {
        let spec = Self {
            kind: ModelKind::Segmenter,
            input_hw,
            stage_channels,
            blocks_per_stage: 1,
            kernel_size: 3,
            pool: (3, 2),
            use_depthwise: true,
            use_separable: true,
            decoder_residual: true,
            dense_hidden: 64,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Toy classifier used in examples and docs: stages of 16/32/64 channels.
    pub fn toy_classifier(input_hw: (usize, usize)) -> Self {
        Self::classifier(input_hw, vec![16, 32, 64]).expect("toy defaults are valid")
    }

    /// Toy segmenter: depth 3 starting at 16 channels.
    pub fn toy_segmenter(input_hw: (usize, usize)) -> Self {
        Self::segmenter(input_hw, vec![16, 32, 64]).expect("toy defaults are valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_channels.is_empty() {
            return Err(Error::Build {
                stage: "stage 0".to_string(),
                msg: "spec has no stages".to_string(),
            });
        }
        for (i, pair) in self.stage_channels.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::Build {
                    stage: format!("stage {}", i + 1),
                    msg: format!(
                        "stage channels must be strictly increasing, got {} after {}",
                        pair[1], pair[0]
                    ),
                });
            }
        }
        if self.stage_channels[0] == 0 {
            return Err(Error::Build {
                stage: "stage 0".to_string(),
                msg: "stage channels must be >= 1".to_string(),
            });
        }
        if self.input_hw.0 == 0 || self.input_hw.1 == 0 {
            return Err(Error::Build {
                stage: "input".to_string(),
                msg: format!("input dims must be >= 1, got {:?}", self.input_hw),
            });
        }
        if self.blocks_per_stage == 0 {
            return Err(Error::Build {
                stage: "stage 0".to_string(),
                msg: "blocks_per_stage must be >= 1".to_string(),
            });
        }
        if self.kernel_size == 0 {
            return Err(Error::Build {
                stage: "stage 0".to_string(),
                msg: "kernel_size must be >= 1".to_string(),
            });
        }
        if self.pool.0 == 0 || self.pool.1 == 0 {
            return Err(Error::Build {
                stage: "pool".to_string(),
                msg: format!("pool window/stride must be >= 1, got {:?}", self.pool),
            });
        }
        if self.kind == ModelKind::Segmenter && self.pool.1 != 2 {
            return Err(Error::Build {
                stage: "decoder".to_string(),
                msg: format!(
                    "segmenter decoder upsamples by 2, so pool stride must be 2, got {}",
                    self.pool.1
                ),
            });
        }
        if self.kind == ModelKind::Classifier && self.dense_hidden == 0 {
            return Err(Error::Build {
                stage: "head".to_string(),
                msg: "dense_hidden must be >= 1".to_string(),
            });
        }
        Ok(())
    }

    /// Canonical one-line encoding, the digest input.
    fn canonical(&self) -> String {
        let kind = match self.kind {
            ModelKind::Classifier => "classifier",
            ModelKind::Segmenter => "segmenter",
        };
        let channels: Vec<String> = self.stage_channels.iter().map(|c| c.to_string()).collect();
        format!(
            "kind={kind};input={}x{};channels={};blocks={};kernel={};pool={},{};depthwise={};separable={};residual={};hidden={}",
            self.input_hw.0,
            self.input_hw.1,
            channels.join(","),
            self.blocks_per_stage,
            self.kernel_size,
            self.pool.0,
            self.pool.1,
            self.use_depthwise,
            self.use_separable,
            self.decoder_residual,
            self.dense_hidden,
        )
    }

    /// Content hash of the spec, stored in checkpoint headers.
    pub fn digest(&self) -> u64 {
        fnv1a64(self.canonical().as_bytes())
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("spec serialization: {e}")))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: ArchSpec =
            toml::from_str(s).map_err(|e| Error::Config(format!("spec parse: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// 64-bit FNV-1a, used for content digests.
pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// A built network: its spec plus every learned weight, with a flat parameter
/// view in a fixed canonical order (forward traversal, weights then bias per
/// layer). Immutable during inference; training owns a mutable copy.
#[derive(Debug, Clone)]
pub enum ModelParams<T> {
    Classifier(ClassifierNet<T>),
    Segmenter(SegmenterNet<T>),
}

/// Intermediate activations captured by [`ModelParams::forward_with_cache`],
/// consumed once by [`ModelParams::backward`].
pub enum ForwardCache<T> {
    Classifier(ClsCache<T>),
    Segmenter(SegCache<T>),
}

impl<T: Scalar> ModelParams<T> {
    pub fn spec(&self) -> &ArchSpec {
        match self {
            ModelParams::Classifier(n) => &n.spec,
            ModelParams::Segmenter(n) => &n.spec,
        }
    }

    /// Run the network. Classifier: `(b, 1, 1, 1)` probabilities; segmenter:
    /// `(b, h, w, 1)` per-pixel probabilities. All outputs in `(0, 1)`.
    pub fn forward(&self, x: &Tensor4<T>) -> Result<Tensor4<T>> {
        Ok(self.forward_with_cache(x)?.0)
    }

    pub fn forward_with_cache(&self, x: &Tensor4<T>) -> Result<(Tensor4<T>, ForwardCache<T>)> {
        self.check_input(x)?;
        match self {
            ModelParams::Classifier(n) => {
                let (y, cache) = n.forward(x)?;
                Ok((y, ForwardCache::Classifier(cache)))
            }
            ModelParams::Segmenter(n) => {
                let (y, cache) = n.forward(x)?;
                Ok((y, ForwardCache::Segmenter(cache)))
            }
        }
    }

    /// Gradients of a scalar loss with respect to every parameter, flattened
    /// in canonical order; `grad_out` is the loss gradient at the output.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: &Tensor4<T>) -> Result<Vec<T>> {
        match (self, cache) {
            (ModelParams::Classifier(n), ForwardCache::Classifier(c)) => n.backward(c, grad_out),
            (ModelParams::Segmenter(n), ForwardCache::Segmenter(c)) => n.backward(c, grad_out),
            _ => Err(Error::shape("forward cache belongs to a different model kind".to_string())),
        }
    }

    fn check_input(&self, x: &Tensor4<T>) -> Result<()> {
        let spec = self.spec();
        let (_, h, w, c) = x.shape();
        if (h, w) != spec.input_hw || c != 1 {
            return Err(Error::shape(format!(
                "model expects (b, {}, {}, 1) input, got {:?}",
                spec.input_hw.0,
                spec.input_hw.1,
                x.shape()
            )));
        }
        Ok(())
    }

    pub fn params_flat(&self) -> Vec<T> {
        match self {
            ModelParams::Classifier(n) => n.params_flat(),
            ModelParams::Segmenter(n) => n.params_flat(),
        }
    }

    pub fn set_params_flat(&mut self, params: &[T]) -> Result<()> {
        match self {
            ModelParams::Classifier(n) => n.set_params_flat(params),
            ModelParams::Segmenter(n) => n.set_params_flat(params),
        }
    }

    /// Trainable parameter count, the sum of every layer's weight and bias
    /// counts.
    pub fn count_params(&self) -> usize {
        self.params_flat().len()
    }

    /// Content hash over the spec and the f32-serialized parameter vector
    /// (stable across a checkpoint round trip).
    pub fn digest(&self) -> u64 {
        let mut bytes = Vec::with_capacity(8 + self.count_params() * 4);
        bytes.extend_from_slice(&self.spec().digest().to_le_bytes());
        for p in self.params_flat() {
            bytes.extend_from_slice(&(p.to_f64_lossy() as f32).to_le_bytes());
        }
        fnv1a64(&bytes)
    }
}

/// Seeded uniform initializers; biases start at zero.
pub(crate) struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub(crate) fn new(seed: u64) -> Self {
        use rand::SeedableRng;
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// He-uniform, for relu-adjacent layers.
    pub(crate) fn he<T: Scalar>(&mut self, n: usize, fan_in: usize) -> Vec<T> {
        let limit = (6.0 / fan_in.max(1) as f64).sqrt();
        (0..n).map(|_| sc(self.rng.gen_range(-limit..limit))).collect()
    }

    /// Glorot-uniform, for the sigmoid heads.
    pub(crate) fn glorot<T: Scalar>(&mut self, n: usize, fan_in: usize, fan_out: usize) -> Vec<T> {
        let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
        (0..n).map(|_| sc(self.rng.gen_range(-limit..limit))).collect()
    }
}

/// Reverse-order gradient collector; blocks are pushed while walking the
/// network backward and flattened into canonical forward order at the end.
pub(crate) struct GradStack<T> {
    blocks: Vec<Vec<T>>,
}

impl<T: Scalar> GradStack<T> {
    pub(crate) fn new() -> Self {
        Self { blocks: Vec::new() }
    }

    pub(crate) fn push_kernel(&mut self, g: crate::nn::KernelGrad<T>) {
        let mut block = g.weights;
        if let Some(b) = g.bias {
            block.extend(b);
        }
        self.blocks.push(block);
    }

    pub(crate) fn push_dense(&mut self, g: crate::nn::DenseGrad<T>) {
        let mut block = g.weights;
        block.extend(g.bias);
        self.blocks.push(block);
    }

    pub(crate) fn flat(mut self) -> Vec<T> {
        self.blocks.reverse();
        self.blocks.into_iter().flatten().collect()
    }
}

/// Append a kernel's parameters (weights then bias) to a flat vector.
pub(crate) fn append_kernel_params<T: Scalar>(out: &mut Vec<T>, k: &crate::nn::Kernel<T>) {
    out.extend_from_slice(k.weights());
    if let Some(b) = k.bias() {
        out.extend_from_slice(b);
    }
}

/// Read a kernel's parameters back from a flat vector at `pos`.
pub(crate) fn read_kernel_params<T: Scalar>(
    src: &[T],
    pos: &mut usize,
    k: &mut crate::nn::Kernel<T>,
) -> Result<()> {
    let nw = k.weights().len();
    let nb = k.bias().map_or(0, <[T]>::len);
    if *pos + nw + nb > src.len() {
        return Err(Error::shape("parameter vector too short for this model".to_string()));
    }
    k.weights_mut().copy_from_slice(&src[*pos..*pos + nw]);
    *pos += nw;
    if let Some(b) = k.bias_mut() {
        b.copy_from_slice(&src[*pos..*pos + nb]);
        *pos += nb;
    }
    Ok(())
}

pub(crate) fn append_dense_params<T: Scalar>(out: &mut Vec<T>, d: &crate::nn::Dense<T>) {
    out.extend_from_slice(d.weights());
    out.extend_from_slice(d.bias());
}

pub(crate) fn read_dense_params<T: Scalar>(
    src: &[T],
    pos: &mut usize,
    d: &mut crate::nn::Dense<T>,
) -> Result<()> {
    let nw = d.weights().len();
    let nb = d.bias().len();
    if *pos + nw + nb > src.len() {
        return Err(Error::shape("parameter vector too short for this model".to_string()));
    }
    d.weights_mut().copy_from_slice(&src[*pos..*pos + nw]);
    *pos += nw;
    d.bias_mut().copy_from_slice(&src[*pos..*pos + nb]);
    *pos += nb;
    Ok(())
}

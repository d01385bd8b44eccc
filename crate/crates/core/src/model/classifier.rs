//! Slice classifier: stages of standard conv + depthwise conv + relu + max
//! pool, closed by a small dense head with a sigmoid logit.

use crate::error::{Error, Result};
use crate::nn::{
    activation, activation_backward, conv2d_backward, conv2d_forward, depthwise_backward,
    depthwise_forward, maxpool_backward, maxpool_forward, out_dim, Activation, ArgmaxMap, Dense,
    Kernel, KernelKind, PadMode,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

use super::{
    append_dense_params, append_kernel_params, read_dense_params, read_kernel_params, ArchSpec,
    GradStack, Init, ModelKind, ModelParams,
};

/// One classifier block: a standard conv into the stage width, then a
/// depthwise conv (or a second standard conv when `use_depthwise` is off).
#[derive(Debug, Clone)]
struct ClsBlock<T> {
    conv: Kernel<T>,
    second: Kernel<T>,
}

#[derive(Debug, Clone)]
pub struct ClassifierNet<T> {
    pub(crate) spec: ArchSpec,
    stages: Vec<Vec<ClsBlock<T>>>,
    hidden: Dense<T>,
    head: Dense<T>,
}

struct BlockCache<T> {
    conv_in: Tensor4<T>,
    second_in: Tensor4<T>,
    relu_in: Tensor4<T>,
}

struct StageCache<T> {
    blocks: Vec<BlockCache<T>>,
    pool_map: ArgmaxMap,
}

pub struct ClsCache<T> {
    stages: Vec<StageCache<T>>,
    flat_shape: (usize, usize, usize, usize),
    hidden_in: Tensor4<T>,
    hidden_pre: Tensor4<T>,
    head_in: Tensor4<T>,
    output: Tensor4<T>,
}

fn in_stage<E: ToString>(stage: usize, block: usize) -> impl Fn(E) -> Error {
    move |e| Error::Build {
        stage: format!("stage {stage} block {block}"),
        msg: e.to_string(),
    }
}

/// Realize a classifier spec with seeded He/Glorot-uniform weights and zero
/// biases. Same spec + seed always yields the same digest.
pub fn build_classifier<T: Scalar>(spec: &ArchSpec, seed: u64) -> Result<ModelParams<T>> {
    spec.validate()?;
    if spec.kind != ModelKind::Classifier {
        return Err(Error::Config("build_classifier needs a classifier spec".to_string()));
    }
    let k = spec.kernel_size;
    let mut init = Init::new(seed);
    let mut stages = Vec::with_capacity(spec.stage_channels.len());
    let mut c_prev = 1usize;
    for &c in &spec.stage_channels {
        let mut blocks = Vec::with_capacity(spec.blocks_per_stage);
        for b in 0..spec.blocks_per_stage {
            let c_in = if b == 0 { c_prev } else { c };
            let conv = Kernel::standard(
                k,
                k,
                c_in,
                c,
                init.he(k * k * c_in * c, k * k * c_in),
                Some(vec![T::zero(); c]),
            )?;
            let second = if spec.use_depthwise {
                Kernel::depthwise(k, k, c, init.he(k * k * c, k * k), Some(vec![T::zero(); c]))?
            } else {
                Kernel::standard(
                    k,
                    k,
                    c,
                    c,
                    init.he(k * k * c * c, k * k * c),
                    Some(vec![T::zero(); c]),
                )?
            };
            blocks.push(ClsBlock { conv, second });
        }
        stages.push(blocks);
        c_prev = c;
    }

    let (mut h, mut w) = spec.input_hw;
    for _ in &spec.stage_channels {
        h = out_dim(h, spec.pool.0, spec.pool.1, PadMode::SameZero)?;
        w = out_dim(w, spec.pool.0, spec.pool.1, PadMode::SameZero)?;
    }
    let flat = h * w * c_prev;
    let hidden = Dense::new(
        flat,
        spec.dense_hidden,
        init.he(flat * spec.dense_hidden, flat),
        vec![T::zero(); spec.dense_hidden],
    )?;
    let head = Dense::new(
        spec.dense_hidden,
        1,
        init.glorot(spec.dense_hidden, spec.dense_hidden, 1),
        vec![T::zero(); 1],
    )?;

    Ok(ModelParams::Classifier(ClassifierNet { spec: spec.clone(), stages, hidden, head }))
}

impl<T: Scalar> ClassifierNet<T> {
    /// Kernels of one block, `(standard conv, second conv)`; the second is
    /// depthwise when the spec asked for it.
    pub fn block_kernels(&self, stage: usize, block: usize) -> (&Kernel<T>, &Kernel<T>) {
        let b = &self.stages[stage][block];
        (&b.conv, &b.second)
    }

    pub(crate) fn forward(&self, x: &Tensor4<T>) -> Result<(Tensor4<T>, ClsCache<T>)> {
        let mut cur = x.clone();
        let mut stage_caches = Vec::with_capacity(self.stages.len());
        for (si, blocks) in self.stages.iter().enumerate() {
            let mut block_caches = Vec::with_capacity(blocks.len());
            for (bi, blk) in blocks.iter().enumerate() {
                let conv_in = cur;
                let conv_out = conv2d_forward(&conv_in, &blk.conv, 1, PadMode::SameZero)
                    .map_err(in_stage(si, bi))?;
                let second_out = match blk.second.kind() {
                    KernelKind::Depthwise => {
                        depthwise_forward(&conv_out, &blk.second, 1, PadMode::SameZero)
                    }
                    _ => conv2d_forward(&conv_out, &blk.second, 1, PadMode::SameZero),
                }
                .map_err(in_stage(si, bi))?;
                cur = activation(&second_out, Activation::Relu);
                block_caches.push(BlockCache { conv_in, second_in: conv_out, relu_in: second_out });
            }
            let (pooled, pool_map) =
                maxpool_forward(&cur, self.spec.pool.0, self.spec.pool.1, PadMode::SameZero)
                    .map_err(in_stage(si, 0))?;
            cur = pooled;
            stage_caches.push(StageCache { blocks: block_caches, pool_map });
        }

        let flat_shape = cur.shape();
        let hidden_in = cur.flatten_features();
        let hidden_pre = self.hidden.forward(&hidden_in)?;
        let head_in = activation(&hidden_pre, Activation::Relu);
        let logits = self.head.forward(&head_in)?;
        let output = activation(&logits, Activation::Sigmoid);
        Ok((
            output.clone(),
            ClsCache { stages: stage_caches, flat_shape, hidden_in, hidden_pre, head_in, output },
        ))
    }

    pub(crate) fn backward(&self, cache: &ClsCache<T>, grad_out: &Tensor4<T>) -> Result<Vec<T>> {
        let mut grads = GradStack::new();
        let mut g = activation_backward(Activation::Sigmoid, &cache.output, grad_out)?;
        let (gh, head_grad) = self.head.backward(&cache.head_in, &g)?;
        grads.push_dense(head_grad);
        g = activation_backward(Activation::Relu, &cache.hidden_pre, &gh)?;
        let (gf, hidden_grad) = self.hidden.backward(&cache.hidden_in, &g)?;
        grads.push_dense(hidden_grad);
        let (_, fh, fw, fc) = cache.flat_shape;
        g = gf.unflatten_features(fh, fw, fc)?;

        for (blocks, sc) in self.stages.iter().zip(&cache.stages).rev() {
            g = maxpool_backward(&sc.pool_map, &g)?;
            for (blk, bc) in blocks.iter().zip(&sc.blocks).rev() {
                g = activation_backward(Activation::Relu, &bc.relu_in, &g)?;
                let (gx, second_grad) = match blk.second.kind() {
                    KernelKind::Depthwise => {
                        depthwise_backward(&bc.second_in, &blk.second, 1, PadMode::SameZero, &g)?
                    }
                    _ => conv2d_backward(&bc.second_in, &blk.second, 1, PadMode::SameZero, &g)?,
                };
                grads.push_kernel(second_grad);
                let (gx, conv_grad) =
                    conv2d_backward(&bc.conv_in, &blk.conv, 1, PadMode::SameZero, &gx)?;
                grads.push_kernel(conv_grad);
                g = gx;
            }
        }
        Ok(grads.flat())
    }

    pub(crate) fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for blocks in &self.stages {
            for blk in blocks {
                append_kernel_params(&mut out, &blk.conv);
                append_kernel_params(&mut out, &blk.second);
            }
        }
        append_dense_params(&mut out, &self.hidden);
        append_dense_params(&mut out, &self.head);
        out
    }

    pub(crate) fn set_params_flat(&mut self, params: &[T]) -> Result<()> {
        let mut pos = 0usize;
        for blocks in &mut self.stages {
            for blk in blocks {
                read_kernel_params(params, &mut pos, &mut blk.conv)?;
                read_kernel_params(params, &mut pos, &mut blk.second)?;
            }
        }
        read_dense_params(params, &mut pos, &mut self.hidden)?;
        read_dense_params(params, &mut pos, &mut self.head)?;
        if pos != params.len() {
            return Err(Error::shape(format!(
                "parameter vector has {} values, model consumes {pos}",
                params.len()
            )));
        }
        Ok(())
    }
}

//! Residual U-shaped segmenter: an encoder of conv + separable-conv stages, a
//! bottleneck, and a decoder that upsamples back to the input size with
//! elementwise-add residual joins from the encoder.
//!
//! Upsampling is learned (transposed conv, kernel 2, stride 2) at stage
//! boundaries where the channel count changes, and nearest-neighbor where the
//! channel counts already match (the deepest boundary). Odd encoder dims are
//! handled by cropping the upsampled map back to the recorded skip dims.

use crate::error::{Error, Result};
use crate::nn::{
    activation, activation_backward, conv2d_backward, conv2d_forward, depthwise_forward,
    maxpool_backward, maxpool_forward, pointwise_backward, pointwise_forward, separable_backward,
    transposed_conv_backward, transposed_conv_forward, upsample2x_nearest,
    upsample2x_nearest_backward, Activation, ArgmaxMap, Kernel, PadMode,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

use super::{
    append_kernel_params, read_kernel_params, ArchSpec, GradStack, Init, ModelKind, ModelParams,
};

#[derive(Debug, Clone)]
enum Refine<T> {
    Separable { dw: Kernel<T>, pw: Kernel<T> },
    Standard(Kernel<T>),
}

/// Lead conv into the stage width followed by refinement convs, relu after
/// each layer.
#[derive(Debug, Clone)]
struct ConvBlock<T> {
    lead: Kernel<T>,
    refine: Vec<Refine<T>>,
}

#[derive(Debug, Clone)]
enum Up<T> {
    Nearest,
    Transposed(Kernel<T>),
}

#[derive(Debug, Clone)]
pub struct SegmenterNet<T> {
    pub(crate) spec: ArchSpec,
    encoder: Vec<ConvBlock<T>>,
    bottleneck: ConvBlock<T>,
    ups: Vec<Up<T>>,
    decoder: Vec<ConvBlock<T>>,
    head: Kernel<T>,
}

struct RefineCache<T> {
    input: Tensor4<T>,
    mid: Option<Tensor4<T>>,
    relu_in: Tensor4<T>,
}

struct BlockCache<T> {
    lead_in: Tensor4<T>,
    lead_out: Tensor4<T>,
    refine: Vec<RefineCache<T>>,
}

struct DecCache<T> {
    up_in: Tensor4<T>,
    up_out_hw: (usize, usize),
    block: BlockCache<T>,
}

pub struct SegCache<T> {
    encoder: Vec<(BlockCache<T>, ArgmaxMap)>,
    bottleneck: BlockCache<T>,
    decoder: Vec<DecCache<T>>,
    head_in: Tensor4<T>,
    output: Tensor4<T>,
}

fn stage_err<E: ToString>(stage: String) -> impl Fn(E) -> Error {
    move |e| Error::Build { stage: stage.clone(), msg: e.to_string() }
}

/// Realize a segmenter spec with seeded weights; see [`build_classifier`] for
/// the initialization conventions.
///
/// [`build_classifier`]: super::build_classifier
pub fn build_segmenter<T: Scalar>(spec: &ArchSpec, seed: u64) -> Result<ModelParams<T>> {
    spec.validate()?;
    if spec.kind != ModelKind::Segmenter {
        return Err(Error::Config("build_segmenter needs a segmenter spec".to_string()));
    }
    let k = spec.kernel_size;
    let mut init = Init::new(seed);

    let make_block = |init: &mut Init, c_in: usize, c: usize| -> Result<ConvBlock<T>> {
        let lead = Kernel::standard(
            k,
            k,
            c_in,
            c,
            init.he(k * k * c_in * c, k * k * c_in),
            Some(vec![T::zero(); c]),
        )?;
        let mut refine = Vec::with_capacity(spec.blocks_per_stage);
        for _ in 0..spec.blocks_per_stage {
            refine.push(if spec.use_separable {
                Refine::Separable {
                    dw: Kernel::depthwise(k, k, c, init.he(k * k * c, k * k), Some(vec![T::zero(); c]))?,
                    pw: Kernel::pointwise(c, c, init.he(c * c, c), Some(vec![T::zero(); c]))?,
                }
            } else {
                Refine::Standard(Kernel::standard(
                    k,
                    k,
                    c,
                    c,
                    init.he(k * k * c * c, k * k * c),
                    Some(vec![T::zero(); c]),
                )?)
            });
        }
        Ok(ConvBlock { lead, refine })
    };

    let channels = &spec.stage_channels;
    let n = channels.len();
    let mut encoder = Vec::with_capacity(n);
    let mut c_prev = 1usize;
    for &c in channels {
        encoder.push(make_block(&mut init, c_prev, c)?);
        c_prev = c;
    }
    let bottleneck = make_block(&mut init, c_prev, c_prev)?;

    let mut ups = Vec::with_capacity(n);
    let mut decoder = Vec::with_capacity(n);
    for j in 0..n {
        let i = n - 1 - j;
        let c_target = channels[i];
        let c_in = if j == 0 { channels[n - 1] } else { channels[i + 1] };
        ups.push(if c_in == c_target {
            Up::Nearest
        } else {
            Up::Transposed(Kernel::standard(
                2,
                2,
                c_in,
                c_target,
                init.he(4 * c_in * c_target, 4 * c_in),
                Some(vec![T::zero(); c_target]),
            )?)
        });
        decoder.push(make_block(&mut init, c_target, c_target)?);
    }

    let head = Kernel::pointwise(
        channels[0],
        1,
        init.glorot(channels[0], channels[0], 1),
        Some(vec![T::zero(); 1]),
    )?;

    Ok(ModelParams::Segmenter(SegmenterNet {
        spec: spec.clone(),
        encoder,
        bottleneck,
        ups,
        decoder,
        head,
    }))
}

impl<T: Scalar> ConvBlock<T> {
    fn forward(&self, x: &Tensor4<T>, stage: &str) -> Result<(Tensor4<T>, BlockCache<T>)> {
        let lead_in = x.clone();
        let lead_out = conv2d_forward(&lead_in, &self.lead, 1, PadMode::SameZero)
            .map_err(stage_err(stage.to_string()))?;
        let mut cur = activation(&lead_out, Activation::Relu);
        let mut refine_caches = Vec::with_capacity(self.refine.len());
        for r in &self.refine {
            let input = cur;
            let (mid, out) = match r {
                Refine::Separable { dw, pw } => {
                    let mid = depthwise_forward(&input, dw, 1, PadMode::SameZero)
                        .map_err(stage_err(stage.to_string()))?;
                    let out =
                        pointwise_forward(&mid, pw).map_err(stage_err(stage.to_string()))?;
                    (Some(mid), out)
                }
                Refine::Standard(k) => (
                    None,
                    conv2d_forward(&input, k, 1, PadMode::SameZero)
                        .map_err(stage_err(stage.to_string()))?,
                ),
            };
            cur = activation(&out, Activation::Relu);
            refine_caches.push(RefineCache { input, mid, relu_in: out });
        }
        Ok((cur, BlockCache { lead_in, lead_out, refine: refine_caches }))
    }

    fn backward(
        &self,
        cache: &BlockCache<T>,
        grad_out: &Tensor4<T>,
        grads: &mut GradStack<T>,
    ) -> Result<Tensor4<T>> {
        let mut g = grad_out.clone();
        for (r, rc) in self.refine.iter().zip(&cache.refine).rev() {
            g = activation_backward(Activation::Relu, &rc.relu_in, &g)?;
            g = match r {
                Refine::Separable { dw, pw } => {
                    let mid = rc.mid.as_ref().expect("separable cache keeps the depthwise output");
                    let (gx, dw_grad, pw_grad) =
                        separable_backward(&rc.input, dw, pw, 1, PadMode::SameZero, mid, &g)?;
                    grads.push_kernel(pw_grad);
                    grads.push_kernel(dw_grad);
                    gx
                }
                Refine::Standard(k) => {
                    let (gx, kg) = conv2d_backward(&rc.input, k, 1, PadMode::SameZero, &g)?;
                    grads.push_kernel(kg);
                    gx
                }
            };
        }
        g = activation_backward(Activation::Relu, &cache.lead_out, &g)?;
        let (gx, lead_grad) = conv2d_backward(&cache.lead_in, &self.lead, 1, PadMode::SameZero, &g)?;
        grads.push_kernel(lead_grad);
        Ok(gx)
    }

    fn append_params(&self, out: &mut Vec<T>) {
        append_kernel_params(out, &self.lead);
        for r in &self.refine {
            match r {
                Refine::Separable { dw, pw } => {
                    append_kernel_params(out, dw);
                    append_kernel_params(out, pw);
                }
                Refine::Standard(k) => append_kernel_params(out, k),
            }
        }
    }

    fn read_params(&mut self, src: &[T], pos: &mut usize) -> Result<()> {
        read_kernel_params(src, pos, &mut self.lead)?;
        for r in &mut self.refine {
            match r {
                Refine::Separable { dw, pw } => {
                    read_kernel_params(src, pos, dw)?;
                    read_kernel_params(src, pos, pw)?;
                }
                Refine::Standard(k) => read_kernel_params(src, pos, k)?,
            }
        }
        Ok(())
    }
}

impl<T: Scalar> SegmenterNet<T> {
    pub(crate) fn forward(&self, x: &Tensor4<T>) -> Result<(Tensor4<T>, SegCache<T>)> {
        let n = self.encoder.len();
        let mut cur = x.clone();
        let mut skips: Vec<Tensor4<T>> = Vec::with_capacity(n);
        let mut enc_caches = Vec::with_capacity(n);
        for (i, block) in self.encoder.iter().enumerate() {
            let (out, bc) = block.forward(&cur, &format!("encoder stage {i}"))?;
            skips.push(out.clone());
            let (pooled, map) =
                maxpool_forward(&out, self.spec.pool.0, self.spec.pool.1, PadMode::SameZero)?;
            cur = pooled;
            enc_caches.push((bc, map));
        }
        let (bot_out, bot_cache) = self.bottleneck.forward(&cur, "bottleneck")?;
        cur = bot_out;

        let mut dec_caches = Vec::with_capacity(n);
        for j in 0..n {
            let i = n - 1 - j;
            let up_in = cur;
            let up_out = match &self.ups[j] {
                Up::Nearest => upsample2x_nearest(&up_in)?,
                Up::Transposed(k) => transposed_conv_forward(&up_in, k, 2)
                    .map_err(stage_err(format!("decoder stage {i}")))?,
            };
            let skip = &skips[i];
            let (sh, sw) = (skip.height(), skip.width());
            let up_out_hw = (up_out.height(), up_out.width());
            let cropped = up_out.crop_hw(sh, sw).map_err(stage_err(format!("decoder stage {i}")))?;
            let joined = if self.spec.decoder_residual {
                cropped.add(skip).map_err(stage_err(format!("decoder stage {i}")))?
            } else {
                cropped
            };
            let (out, bc) = self.decoder[j].forward(&joined, &format!("decoder stage {i}"))?;
            cur = out;
            dec_caches.push(DecCache { up_in, up_out_hw, block: bc });
        }

        let head_in = cur;
        let logits = pointwise_forward(&head_in, &self.head)?;
        let output = activation(&logits, Activation::Sigmoid);
        Ok((
            output.clone(),
            SegCache { encoder: enc_caches, bottleneck: bot_cache, decoder: dec_caches, head_in, output },
        ))
    }

    pub(crate) fn backward(&self, cache: &SegCache<T>, grad_out: &Tensor4<T>) -> Result<Vec<T>> {
        let n = self.encoder.len();
        let mut grads = GradStack::new();
        let mut g = activation_backward(Activation::Sigmoid, &cache.output, grad_out)?;
        let (gx, head_grad) = pointwise_backward(&cache.head_in, &self.head, &g)?;
        grads.push_kernel(head_grad);
        g = gx;

        let mut skip_grads: Vec<Option<Tensor4<T>>> = (0..n).map(|_| None).collect();
        for j in (0..n).rev() {
            let i = n - 1 - j;
            let dc = &cache.decoder[j];
            g = self.decoder[j].backward(&dc.block, &g, &mut grads)?;
            if self.spec.decoder_residual {
                skip_grads[i] = Some(g.clone());
            }
            // Crop backward: re-embed into the pre-crop footprint.
            g = g.zero_pad_hw(dc.up_out_hw.0, dc.up_out_hw.1)?;
            g = match &self.ups[j] {
                Up::Nearest => upsample2x_nearest_backward(dc.up_in.shape(), &g)?,
                Up::Transposed(k) => {
                    let (gx, kg) = transposed_conv_backward(&dc.up_in, k, 2, &g)?;
                    grads.push_kernel(kg);
                    gx
                }
            };
        }

        g = self.bottleneck.backward(&cache.bottleneck, &g, &mut grads)?;

        for i in (0..n).rev() {
            let (bc, map) = &cache.encoder[i];
            g = maxpool_backward(map, &g)?;
            if let Some(sg) = &skip_grads[i] {
                g = g.add(sg)?;
            }
            g = self.encoder[i].backward(bc, &g, &mut grads)?;
        }
        Ok(grads.flat())
    }

    pub(crate) fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for block in &self.encoder {
            block.append_params(&mut out);
        }
        self.bottleneck.append_params(&mut out);
        for j in 0..self.decoder.len() {
            if let Up::Transposed(k) = &self.ups[j] {
                append_kernel_params(&mut out, k);
            }
            self.decoder[j].append_params(&mut out);
        }
        append_kernel_params(&mut out, &self.head);
        out
    }

    pub(crate) fn set_params_flat(&mut self, params: &[T]) -> Result<()> {
        let mut pos = 0usize;
        for block in &mut self.encoder {
            block.read_params(params, &mut pos)?;
        }
        self.bottleneck.read_params(params, &mut pos)?;
        for j in 0..self.decoder.len() {
            if let Up::Transposed(k) = &mut self.ups[j] {
                read_kernel_params(params, &mut pos, k)?;
            }
            self.decoder[j].read_params(params, &mut pos)?;
        }
        read_kernel_params(params, &mut pos, &mut self.head)?;
        if pos != params.len() {
            return Err(Error::shape(format!(
                "parameter vector has {} values, model consumes {pos}",
                params.len()
            )));
        }
        Ok(())
    }
}

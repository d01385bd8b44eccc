//! Forward and backward passes for the four convolution variants.
//!
//! All convolutions are cross-correlations (no kernel flip), the usual
//! deep-learning convention; the transposed convolution is the exact adjoint
//! of the valid-padded forward convolution at the same stride.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

use super::kernel::{out_dim, pad_before, Kernel, KernelGrad, KernelKind, PadMode};

fn check_kind<T: Scalar>(k: &Kernel<T>, want: KernelKind, op: &str) -> Result<()> {
    if k.kind() != want {
        return Err(Error::shape(format!("{op} requires a {want:?} kernel, got {:?}", k.kind())));
    }
    Ok(())
}

fn check_channels<T: Scalar>(x: &Tensor4<T>, k: &Kernel<T>, op: &str) -> Result<()> {
    if k.in_channels() != x.channels() {
        return Err(Error::shape(format!(
            "{op}: kernel expects {} input channels, tensor has {}",
            k.in_channels(),
            x.channels()
        )));
    }
    Ok(())
}

/// Standard 2D convolution: every output channel sums over all input channels.
pub fn conv2d_forward<T: Scalar>(
    x: &Tensor4<T>,
    k: &Kernel<T>,
    stride: usize,
    pad: PadMode,
) -> Result<Tensor4<T>> {
    check_kind(k, KernelKind::Standard, "conv2d_forward")?;
    check_channels(x, k, "conv2d_forward")?;
    let (batch, height, width, c_in) = x.shape();
    let (kh, kw) = k.spatial();
    let c_out = k.out_channels();
    let out_h = out_dim(height, kh, stride, pad)?;
    let out_w = out_dim(width, kw, stride, pad)?;
    let pad_top = pad_before(height, kh, stride, pad)?;
    let pad_left = pad_before(width, kw, stride, pad)?;

    let mut out = Tensor4::zeros(batch, out_h, out_w, c_out)?;
    let mut row = vec![T::zero(); c_out];
    for b in 0..batch {
        for oy in 0..out_h {
            for ox in 0..out_w {
                for (co, r) in row.iter_mut().enumerate() {
                    *r = k.bias_at(co);
                }
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad_top as isize;
                    if iy < 0 || iy as usize >= height {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad_left as isize;
                        if ix < 0 || ix as usize >= width {
                            continue;
                        }
                        let x_base = x.index(b, iy as usize, ix as usize, 0);
                        for ci in 0..c_in {
                            let xv = x.data()[x_base + ci];
                            for (co, r) in row.iter_mut().enumerate() {
                                *r = *r + xv * k.w_standard(ky, kx, ci, co);
                            }
                        }
                    }
                }
                let o_base = out.index(b, oy, ox, 0);
                out.data_mut()[o_base..o_base + c_out].copy_from_slice(&row);
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv2d_forward`] with respect to the input and the kernel.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor4<T>,
    k: &Kernel<T>,
    stride: usize,
    pad: PadMode,
    grad_out: &Tensor4<T>,
) -> Result<(Tensor4<T>, KernelGrad<T>)> {
    check_kind(k, KernelKind::Standard, "conv2d_backward")?;
    check_channels(x, k, "conv2d_backward")?;
    let (batch, height, width, c_in) = x.shape();
    let (kh, kw) = k.spatial();
    let c_out = k.out_channels();
    let out_h = out_dim(height, kh, stride, pad)?;
    let out_w = out_dim(width, kw, stride, pad)?;
    if grad_out.shape() != (batch, out_h, out_w, c_out) {
        return Err(Error::shape(format!(
            "conv2d_backward: grad_out {:?} != forward output ({batch}, {out_h}, {out_w}, {c_out})",
            grad_out.shape()
        )));
    }
    let pad_top = pad_before(height, kh, stride, pad)?;
    let pad_left = pad_before(width, kw, stride, pad)?;

    let mut grad_x = Tensor4::zeros(batch, height, width, c_in)?;
    let mut grad = KernelGrad::zeros_like(k);
    for b in 0..batch {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let g_base = grad_out.index(b, oy, ox, 0);
                if let Some(bias) = grad.bias.as_mut() {
                    for (co, gb) in bias.iter_mut().enumerate() {
                        *gb = *gb + grad_out.data()[g_base + co];
                    }
                }
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad_top as isize;
                    if iy < 0 || iy as usize >= height {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad_left as isize;
                        if ix < 0 || ix as usize >= width {
                            continue;
                        }
                        let x_base = x.index(b, iy as usize, ix as usize, 0);
                        for ci in 0..c_in {
                            let xv = x.data()[x_base + ci];
                            let w_base = ((ky * kw + kx) * c_in + ci) * c_out;
                            let mut gx = T::zero();
                            for co in 0..c_out {
                                let g = grad_out.data()[g_base + co];
                                gx = gx + g * k.weights()[w_base + co];
                                grad.weights[w_base + co] = grad.weights[w_base + co] + xv * g;
                            }
                            let xi = x_base + ci;
                            grad_x.data_mut()[xi] = grad_x.data()[xi] + gx;
                        }
                    }
                }
            }
        }
    }
    Ok((grad_x, grad))
}

/// Depthwise convolution: channel `n` of the output depends only on channel
/// `n` of the input and filter slice `n`.
pub fn depthwise_forward<T: Scalar>(
    x: &Tensor4<T>,
    k: &Kernel<T>,
    stride: usize,
    pad: PadMode,
) -> Result<Tensor4<T>> {
    check_kind(k, KernelKind::Depthwise, "depthwise_forward")?;
    check_channels(x, k, "depthwise_forward")?;
    let (batch, height, width, channels) = x.shape();
    let (kh, kw) = k.spatial();
    let out_h = out_dim(height, kh, stride, pad)?;
    let out_w = out_dim(width, kw, stride, pad)?;
    let pad_top = pad_before(height, kh, stride, pad)?;
    let pad_left = pad_before(width, kw, stride, pad)?;

    let mut out = Tensor4::zeros(batch, out_h, out_w, channels)?;
    let mut row = vec![T::zero(); channels];
    for b in 0..batch {
        for oy in 0..out_h {
            for ox in 0..out_w {
                for (c, r) in row.iter_mut().enumerate() {
                    *r = k.bias_at(c);
                }
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad_top as isize;
                    if iy < 0 || iy as usize >= height {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad_left as isize;
                        if ix < 0 || ix as usize >= width {
                            continue;
                        }
                        let x_base = x.index(b, iy as usize, ix as usize, 0);
                        for (c, r) in row.iter_mut().enumerate() {
                            *r = *r + x.data()[x_base + c] * k.w_depthwise(ky, kx, c);
                        }
                    }
                }
                let o_base = out.index(b, oy, ox, 0);
                out.data_mut()[o_base..o_base + channels].copy_from_slice(&row);
            }
        }
    }
    Ok(out)
}

/// Gradients of [`depthwise_forward`]; channel `n` gradients touch only
/// channel `n`.
pub fn depthwise_backward<T: Scalar>(
    x: &Tensor4<T>,
    k: &Kernel<T>,
    stride: usize,
    pad: PadMode,
    grad_out: &Tensor4<T>,
) -> Result<(Tensor4<T>, KernelGrad<T>)> {
    check_kind(k, KernelKind::Depthwise, "depthwise_backward")?;
    check_channels(x, k, "depthwise_backward")?;
    let (batch, height, width, channels) = x.shape();
    let (kh, kw) = k.spatial();
    let out_h = out_dim(height, kh, stride, pad)?;
    let out_w = out_dim(width, kw, stride, pad)?;
    if grad_out.shape() != (batch, out_h, out_w, channels) {
        return Err(Error::shape(format!(
            "depthwise_backward: grad_out {:?} != forward output ({batch}, {out_h}, {out_w}, {channels})",
            grad_out.shape()
        )));
    }
    let pad_top = pad_before(height, kh, stride, pad)?;
    let pad_left = pad_before(width, kw, stride, pad)?;

    let mut grad_x = Tensor4::zeros(batch, height, width, channels)?;
    let mut grad = KernelGrad::zeros_like(k);
    for b in 0..batch {
        for oy in 0..out_h {
            for ox in 0..out_w {
                let g_base = grad_out.index(b, oy, ox, 0);
                if let Some(bias) = grad.bias.as_mut() {
                    for (c, gb) in bias.iter_mut().enumerate() {
                        *gb = *gb + grad_out.data()[g_base + c];
                    }
                }
                for ky in 0..kh {
                    let iy = (oy * stride + ky) as isize - pad_top as isize;
                    if iy < 0 || iy as usize >= height {
                        continue;
                    }
                    for kx in 0..kw {
                        let ix = (ox * stride + kx) as isize - pad_left as isize;
                        if ix < 0 || ix as usize >= width {
                            continue;
                        }
                        let x_base = x.index(b, iy as usize, ix as usize, 0);
                        let w_base = (ky * kw + kx) * channels;
                        for c in 0..channels {
                            let g = grad_out.data()[g_base + c];
                            let xi = x_base + c;
                            grad_x.data_mut()[xi] =
                                grad_x.data()[xi] + g * k.weights()[w_base + c];
                            grad.weights[w_base + c] =
                                grad.weights[w_base + c] + g * x.data()[xi];
                        }
                    }
                }
            }
        }
    }
    Ok((grad_x, grad))
}

/// Pointwise (1x1) convolution: mixes channels at every pixel, spatial dims
/// unchanged.
pub fn pointwise_forward<T: Scalar>(x: &Tensor4<T>, k: &Kernel<T>) -> Result<Tensor4<T>> {
    check_kind(k, KernelKind::Pointwise, "pointwise_forward")?;
    check_channels(x, k, "pointwise_forward")?;
    let (batch, height, width, c_in) = x.shape();
    let c_out = k.out_channels();

    let mut out = Tensor4::zeros(batch, height, width, c_out)?;
    let pixels = batch * height * width;
    let mut row = vec![T::zero(); c_out];
    for p in 0..pixels {
        let x_base = p * c_in;
        let o_base = p * c_out;
        for (co, r) in row.iter_mut().enumerate() {
            *r = k.bias_at(co);
        }
        for ci in 0..c_in {
            let xv = x.data()[x_base + ci];
            let w_base = ci * c_out;
            for (co, r) in row.iter_mut().enumerate() {
                *r = *r + xv * k.weights()[w_base + co];
            }
        }
        out.data_mut()[o_base..o_base + c_out].copy_from_slice(&row);
    }
    Ok(out)
}

/// Gradients of [`pointwise_forward`].
pub fn pointwise_backward<T: Scalar>(
    x: &Tensor4<T>,
    k: &Kernel<T>,
    grad_out: &Tensor4<T>,
) -> Result<(Tensor4<T>, KernelGrad<T>)> {
    check_kind(k, KernelKind::Pointwise, "pointwise_backward")?;
    check_channels(x, k, "pointwise_backward")?;
    let (batch, height, width, c_in) = x.shape();
    let c_out = k.out_channels();
    if grad_out.shape() != (batch, height, width, c_out) {
        return Err(Error::shape(format!(
            "pointwise_backward: grad_out {:?} != ({batch}, {height}, {width}, {c_out})",
            grad_out.shape()
        )));
    }

    let mut grad_x = Tensor4::zeros(batch, height, width, c_in)?;
    let mut grad = KernelGrad::zeros_like(k);
    let pixels = batch * height * width;
    for p in 0..pixels {
        let x_base = p * c_in;
        let g_base = p * c_out;
        if let Some(bias) = grad.bias.as_mut() {
            for (co, gb) in bias.iter_mut().enumerate() {
                *gb = *gb + grad_out.data()[g_base + co];
            }
        }
        for ci in 0..c_in {
            let xv = x.data()[x_base + ci];
            let w_base = ci * c_out;
            let mut gx = T::zero();
            for co in 0..c_out {
                let g = grad_out.data()[g_base + co];
                gx = gx + g * k.weights()[w_base + co];
                grad.weights[w_base + co] = grad.weights[w_base + co] + xv * g;
            }
            grad_x.data_mut()[x_base + ci] = gx;
        }
    }
    Ok((grad_x, grad))
}

/// Separable convolution: depthwise then pointwise, bit-identical to calling
/// the two stages in sequence.
pub fn separable_forward<T: Scalar>(
    x: &Tensor4<T>,
    dk: &Kernel<T>,
    pk: &Kernel<T>,
    stride: usize,
    pad: PadMode,
) -> Result<Tensor4<T>> {
    if pk.in_channels() != dk.out_channels() {
        return Err(Error::shape(format!(
            "separable_forward: pointwise expects {} channels, depthwise yields {}",
            pk.in_channels(),
            dk.out_channels()
        )));
    }
    let mid = depthwise_forward(x, dk, stride, pad)?;
    pointwise_forward(&mid, pk)
}

/// Gradients of [`separable_forward`]. `mid` is the depthwise output cached
/// from the forward pass.
pub fn separable_backward<T: Scalar>(
    x: &Tensor4<T>,
    dk: &Kernel<T>,
    pk: &Kernel<T>,
    stride: usize,
    pad: PadMode,
    mid: &Tensor4<T>,
    grad_out: &Tensor4<T>,
) -> Result<(Tensor4<T>, KernelGrad<T>, KernelGrad<T>)> {
    let (grad_mid, pk_grad) = pointwise_backward(mid, pk, grad_out)?;
    let (grad_x, dk_grad) = depthwise_backward(x, dk, stride, pad, &grad_mid)?;
    Ok((grad_x, dk_grad, pk_grad))
}

/// Transposed convolution: every input element scatters a kernel-weighted
/// footprint; output spatial dim is `(in - 1) * stride + k`.
pub fn transposed_conv_forward<T: Scalar>(
    x: &Tensor4<T>,
    k: &Kernel<T>,
    stride: usize,
) -> Result<Tensor4<T>> {
    check_kind(k, KernelKind::Standard, "transposed_conv_forward")?;
    check_channels(x, k, "transposed_conv_forward")?;
    if stride == 0 {
        return Err(Error::shape("stride must be >= 1".to_string()));
    }
    let (batch, height, width, c_in) = x.shape();
    let (kh, kw) = k.spatial();
    let c_out = k.out_channels();
    let out_h = (height - 1) * stride + kh;
    let out_w = (width - 1) * stride + kw;

    let mut out = Tensor4::zeros(batch, out_h, out_w, c_out)?;
    if k.bias().is_some() {
        for b in 0..batch {
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let base = out.index(b, oy, ox, 0);
                    for co in 0..c_out {
                        out.data_mut()[base + co] = k.bias_at(co);
                    }
                }
            }
        }
    }
    for b in 0..batch {
        for iy in 0..height {
            for ix in 0..width {
                let x_base = x.index(b, iy, ix, 0);
                for ky in 0..kh {
                    let oy = iy * stride + ky;
                    for kx in 0..kw {
                        let ox = ix * stride + kx;
                        let o_base = out.index(b, oy, ox, 0);
                        for ci in 0..c_in {
                            let xv = x.data()[x_base + ci];
                            let w_base = ((ky * kw + kx) * c_in + ci) * c_out;
                            for co in 0..c_out {
                                out.data_mut()[o_base + co] =
                                    out.data()[o_base + co] + xv * k.weights()[w_base + co];
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`transposed_conv_forward`].
pub fn transposed_conv_backward<T: Scalar>(
    x: &Tensor4<T>,
    k: &Kernel<T>,
    stride: usize,
    grad_out: &Tensor4<T>,
) -> Result<(Tensor4<T>, KernelGrad<T>)> {
    check_kind(k, KernelKind::Standard, "transposed_conv_backward")?;
    check_channels(x, k, "transposed_conv_backward")?;
    let (batch, height, width, c_in) = x.shape();
    let (kh, kw) = k.spatial();
    let c_out = k.out_channels();
    let out_h = (height - 1) * stride + kh;
    let out_w = (width - 1) * stride + kw;
    if grad_out.shape() != (batch, out_h, out_w, c_out) {
        return Err(Error::shape(format!(
            "transposed_conv_backward: grad_out {:?} != ({batch}, {out_h}, {out_w}, {c_out})",
            grad_out.shape()
        )));
    }

    let mut grad_x = Tensor4::zeros(batch, height, width, c_in)?;
    let mut grad = KernelGrad::zeros_like(k);
    if let Some(bias) = grad.bias.as_mut() {
        for b in 0..batch {
            for oy in 0..out_h {
                for ox in 0..out_w {
                    let base = grad_out.index(b, oy, ox, 0);
                    for (co, gb) in bias.iter_mut().enumerate() {
                        *gb = *gb + grad_out.data()[base + co];
                    }
                }
            }
        }
    }
    for b in 0..batch {
        for iy in 0..height {
            for ix in 0..width {
                let x_base = x.index(b, iy, ix, 0);
                for ky in 0..kh {
                    let oy = iy * stride + ky;
                    for kx in 0..kw {
                        let ox = ix * stride + kx;
                        let g_base = grad_out.index(b, oy, ox, 0);
                        for ci in 0..c_in {
                            let xv = x.data()[x_base + ci];
                            let w_base = ((ky * kw + kx) * c_in + ci) * c_out;
                            let mut gx = grad_x.data()[x_base + ci];
                            for co in 0..c_out {
                                let g = grad_out.data()[g_base + co];
                                gx = gx + g * k.weights()[w_base + co];
                                grad.weights[w_base + co] = grad.weights[w_base + co] + xv * g;
                            }
                            grad_x.data_mut()[x_base + ci] = gx;
                        }
                    }
                }
            }
        }
    }
    Ok((grad_x, grad))
}

//! Shared test support: brute-force oracles (independent of the library's
//! layer implementations) and central finite-difference machinery.
//!
//! Every oracle materializes an explicitly padded buffer and runs plain
//! nested loops over it, a deliberately different computation path from the
//! library's bounds-checked in-place kernels.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triseg_core::nn::Kernel;
use triseg_core::scalar::Scalar;
use triseg_core::tensor::Tensor4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor<T: Scalar>(
    rng: &mut ChaCha8Rng,
    b: usize,
    h: usize,
    w: usize,
    c: usize,
    range: (f64, f64),
) -> Tensor4<T> {
    Tensor4::from_fn(b, h, w, c, |_, _, _, _| T::from_f64_lossy(rng.gen_range(range.0..range.1)))
        .unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, range: (f64, f64)) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(range.0..range.1)).collect()
}

/// Relative error with a unit floor in the denominator, so near-zero outputs
/// are compared absolutely.
pub fn rel_err_unit_floor(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Relative error for gradient checks; denominator floored at 1e-6.
pub fn rel_err_grad(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6)
}

pub fn max_rel_err_unit_floor(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "oracle and implementation disagree on length");
    a.iter().zip(b).map(|(&x, &y)| rel_err_unit_floor(x, y)).fold(0.0, f64::max)
}

pub fn tensor_to_f64<T: Scalar>(t: &Tensor4<T>) -> Vec<f64> {
    t.data().iter().map(|v| v.to_f64_lossy()).collect()
}

pub fn dot<T: Scalar>(a: &Tensor4<T>, b: &Tensor4<T>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| x.to_f64_lossy() * y.to_f64_lossy())
        .sum()
}

/// Padding policy recomputed from the stated contract: `same` keeps
/// `ceil(in / stride)` outputs with the total pad split low-side-first.
fn oracle_pad(in_dim: usize, k: usize, stride: usize, same: bool) -> (usize, usize) {
    if same {
        let out = in_dim.div_ceil(stride);
        let total = ((out - 1) * stride + k).saturating_sub(in_dim);
        (out, total / 2)
    } else {
        assert!(k <= in_dim, "valid padding with window {k} > input {in_dim}");
        ((in_dim - k) / stride + 1, 0)
    }
}

/// Dense padded copy of an NHWC tensor, `fill` outside the original extent.
struct Padded {
    b: usize,
    h: usize,
    w: usize,
    c: usize,
    data: Vec<f64>,
}

impl Padded {
    fn build<T: Scalar>(x: &Tensor4<T>, pad_h: usize, pad_w: usize, extra_h: usize, extra_w: usize, fill: f64) -> Self {
        let (b, h, w, c) = x.shape();
        let nh = h + pad_h + extra_h;
        let nw = w + pad_w + extra_w;
        let mut data = vec![fill; b * nh * nw * c];
        for bi in 0..b {
            for y in 0..h {
                for xx in 0..w {
                    for ci in 0..c {
                        data[((bi * nh + y + pad_h) * nw + xx + pad_w) * c + ci] =
                            x.at(bi, y, xx, ci).to_f64_lossy();
                    }
                }
            }
        }
        Self { b, h: nh, w: nw, c, data }
    }

    fn at(&self, b: usize, y: usize, x: usize, c: usize) -> f64 {
        self.data[((b * self.h + y) * self.w + x) * self.c + c]
    }
}

/// Direct six-nested-loop standard convolution over an explicitly padded
/// buffer.
pub fn oracle_conv2d<T: Scalar>(
    x: &Tensor4<T>,
    k: &Kernel<T>,
    stride: usize,
    same: bool,
) -> (Vec<f64>, (usize, usize, usize, usize)) {
    let (b, h, w, c_in) = x.shape();
    let (kh, kw) = k.spatial();
    let c_out = k.out_channels();
    let (out_h, pad_h) = oracle_pad(h, kh, stride, same);
    let (out_w, pad_w) = oracle_pad(w, kw, stride, same);
    // Pad generously on the high side; reads never pass (out-1)*stride + k.
    let p = Padded::build(x, pad_h, pad_w, kh + stride, kw + stride, 0.0);
    let wts: Vec<f64> = k.weights().iter().map(|v| v.to_f64_lossy()).collect();
    let bias: Vec<f64> = match k.bias() {
        Some(bs) => bs.iter().map(|v| v.to_f64_lossy()).collect(),
        None => vec![0.0; c_out],
    };
    let mut out = vec![0.0; b * out_h * out_w * c_out];
    for bi in 0..b {
        for oy in 0..out_h {
            for ox in 0..out_w {
                for co in 0..c_out {
                    let mut acc = bias[co];
                    for ky in 0..kh {
                        for kx in 0..kw {
                            for ci in 0..c_in {
                                acc += p.at(bi, oy * stride + ky, ox * stride + kx, ci)
                                    * wts[((ky * kw + kx) * c_in + ci) * c_out + co];
                            }
                        }
                    }
                    out[((bi * out_h + oy) * out_w + ox) * c_out + co] = acc;
                }
            }
        }
    }
    (out, (b, out_h, out_w, c_out))
}

/// Depthwise oracle: one single-channel standard convolution per channel,
/// concatenated along the channel axis.
pub fn oracle_depthwise<T: Scalar>(
    x: &Tensor4<T>,
    k: &Kernel<T>,
    stride: usize,
    same: bool,
) -> (Vec<f64>, (usize, usize, usize, usize)) {
    let (b, h, w, channels) = x.shape();
    let (kh, kw) = k.spatial();
    let mut per_channel = Vec::with_capacity(channels);
    let mut shape = (0, 0, 0, 0);
    for c in 0..channels {
        let xc = Tensor4::<T>::from_fn(b, h, w, 1, |bi, y, xx, _| x.at(bi, y, xx, c)).unwrap();
        let wts: Vec<T> = (0..kh * kw)
            .map(|i| k.weights()[i * channels + c])
            .collect();
        let bias = k.bias().map(|bs| vec![bs[c]]);
        let kc = Kernel::standard(kh, kw, 1, 1, wts, bias).unwrap();
        let (out, s) = oracle_conv2d(&xc, &kc, stride, same);
        shape = s;
        per_channel.push(out);
    }
    let (ob, oh, ow, _) = shape;
    let mut out = vec![0.0; ob * oh * ow * channels];
    for (c, chan) in per_channel.iter().enumerate() {
        for (i, &v) in chan.iter().enumerate() {
            out[i * channels + c] = v;
        }
    }
    (out, (ob, oh, ow, channels))
}

/// Pointwise oracle: per-pixel dot products, straight from the formula.
pub fn oracle_pointwise<T: Scalar>(x: &Tensor4<T>, k: &Kernel<T>) -> Vec<f64> {
    let (b, h, w, c_in) = x.shape();
    let c_out = k.out_channels();
    let wts: Vec<f64> = k.weights().iter().map(|v| v.to_f64_lossy()).collect();
    let bias: Vec<f64> = match k.bias() {
        Some(bs) => bs.iter().map(|v| v.to_f64_lossy()).collect(),
        None => vec![0.0; c_out],
    };
    let mut out = vec![0.0; b * h * w * c_out];
    for p in 0..b * h * w {
        for co in 0..c_out {
            let mut acc = bias[co];
            for ci in 0..c_in {
                acc += x.data()[p * c_in + ci].to_f64_lossy() * wts[ci * c_out + co];
            }
            out[p * c_out + co] = acc;
        }
    }
    out
}

/// Nested-loop max pool with explicit -inf padding.
pub fn oracle_maxpool<T: Scalar>(
    x: &Tensor4<T>,
    window: usize,
    stride: usize,
    same: bool,
) -> (Vec<f64>, (usize, usize, usize, usize)) {
    let (b, h, w, c) = x.shape();
    let (out_h, pad_h) = oracle_pad(h, window, stride, same);
    let (out_w, pad_w) = oracle_pad(w, window, stride, same);
    let p = Padded::build(x, pad_h, pad_w, window + stride, window + stride, f64::NEG_INFINITY);
    let mut out = vec![0.0; b * out_h * out_w * c];
    for bi in 0..b {
        for oy in 0..out_h {
            for ox in 0..out_w {
                for ci in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    for ky in 0..window {
                        for kx in 0..window {
                            best = best.max(p.at(bi, oy * stride + ky, ox * stride + kx, ci));
                        }
                    }
                    out[((bi * out_h + oy) * out_w + ox) * c + ci] = best;
                }
            }
        }
    }
    (out, (b, out_h, out_w, c))
}

/// Transposed-convolution oracle: zero-insert the input at the stride, then
/// run a full-padding valid convolution with the 180-degree-flipped kernel.
pub fn oracle_transposed_conv<T: Scalar>(
    x: &Tensor4<T>,
    k: &Kernel<T>,
    stride: usize,
) -> (Vec<f64>, (usize, usize, usize, usize)) {
    let (b, h, w, c_in) = x.shape();
    let (kh, kw) = k.spatial();
    let c_out = k.out_channels();

    // Zero-insertion: (in-1)*stride + 1 per axis, values at stride multiples.
    let zh = (h - 1) * stride + 1;
    let zw = (w - 1) * stride + 1;
    let dilated = Tensor4::<T>::from_fn(b, zh, zw, c_in, |bi, y, xx, ci| {
        if y % stride == 0 && xx % stride == 0 {
            x.at(bi, y / stride, xx / stride, ci)
        } else {
            T::zero()
        }
    })
    .unwrap();

    // Flip the kernel spatially; channel roles stay (c_in -> c_out).
    let flipped: Vec<T> = {
        let mut f = vec![T::zero(); kh * kw * c_in * c_out];
        for ky in 0..kh {
            for kx in 0..kw {
                for ci in 0..c_in {
                    for co in 0..c_out {
                        f[(((kh - 1 - ky) * kw + (kw - 1 - kx)) * c_in + ci) * c_out + co] =
                            k.weights()[((ky * kw + kx) * c_in + ci) * c_out + co];
                    }
                }
            }
        }
        f
    };
    let fk = Kernel::standard(kh, kw, c_in, c_out, flipped, None).unwrap();

    // Full padding: k-1 on every side, then a valid stride-1 convolution.
    let p = Padded::build(&dilated, kh - 1, kw - 1, kh - 1, kw - 1, 0.0);
    let padded_t = Tensor4::<T>::from_fn(b, p.h, p.w, c_in, |bi, y, xx, ci| {
        T::from_f64_lossy(p.at(bi, y, xx, ci))
    })
    .unwrap();
    let (mut out, shape) = oracle_conv2d(&padded_t, &fk, 1, false);

    if let Some(bias) = k.bias() {
        for (i, v) in out.iter_mut().enumerate() {
            *v += bias[i % c_out].to_f64_lossy();
        }
    }
    assert_eq!(shape, (b, (h - 1) * stride + kh, (w - 1) * stride + kw, c_out));
    (out, shape)
}

/// Central finite differences of a scalar function at `theta`.
pub fn central_differences(
    f: &mut dyn FnMut(&[f64]) -> f64,
    theta: &[f64],
    eps: f64,
) -> Vec<f64> {
    let mut grad = vec![0.0; theta.len()];
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + eps;
        let up = f(&probe);
        probe[i] = theta[i] - eps;
        let down = f(&probe);
        probe[i] = theta[i];
        grad[i] = (up - down) / (2.0 * eps);
    }
    grad
}

/// Worst relative error between analytic and finite-difference gradients.
pub fn max_grad_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| rel_err_grad(a, n))
        .fold(0.0, f64::max)
}

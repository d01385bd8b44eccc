//! Max pooling and nearest-neighbor upsampling.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor4;

use super::kernel::{out_dim, pad_before, PadMode};

/// Winner positions from a max-pool forward pass: one flat input index per
/// output element, consumed by [`maxpool_backward`].
#[derive(Debug, Clone)]
pub struct ArgmaxMap {
    input_shape: (usize, usize, usize, usize),
    output_shape: (usize, usize, usize, usize),
    winners: Vec<usize>,
}

impl ArgmaxMap {
    pub fn winners(&self) -> &[usize] {
        &self.winners
    }

    pub fn output_shape(&self) -> (usize, usize, usize, usize) {
        self.output_shape
    }
}

/// Max over each window. Padding cells behave as negative infinity, so in
/// `same-zero` mode the output dim is `ceil(in / stride)` and padding never
/// wins. Ties go to the first in-bounds cell in row-major order.
pub fn maxpool_forward<T: Scalar>(
    x: &Tensor4<T>,
    window: usize,
    stride: usize,
    pad: PadMode,
) -> Result<(Tensor4<T>, ArgmaxMap)> {
    if window == 0 {
        return Err(Error::shape("pool window must be >= 1".to_string()));
    }
    let (batch, height, width, channels) = x.shape();
    let out_h = out_dim(height, window, stride, pad)?;
    let out_w = out_dim(width, window, stride, pad)?;
    let pad_top = pad_before(height, window, stride, pad)?;
    let pad_left = pad_before(width, window, stride, pad)?;

    let mut out = Tensor4::zeros(batch, out_h, out_w, channels)?;
    let mut winners = vec![0usize; out.len()];
    for b in 0..batch {
        for oy in 0..out_h {
            for ox in 0..out_w {
                for c in 0..channels {
                    let mut best = T::neg_infinity();
                    let mut best_idx = usize::MAX;
                    for ky in 0..window {
                        let iy = (oy * stride + ky) as isize - pad_top as isize;
                        if iy < 0 || iy as usize >= height {
                            continue;
                        }
                        for kx in 0..window {
                            let ix = (ox * stride + kx) as isize - pad_left as isize;
                            if ix < 0 || ix as usize >= width {
                                continue;
                            }
                            let idx = x.index(b, iy as usize, ix as usize, c);
                            let v = x.data()[idx];
                            if v > best {
                                best = v;
                                best_idx = idx;
                            }
                        }
                    }
                    if best_idx == usize::MAX {
                        return Err(Error::shape(format!(
                            "pool window at ({oy}, {ox}) covers no input cell"
                        )));
                    }
                    let o = out.index(b, oy, ox, c);
                    out.data_mut()[o] = best;
                    winners[o] = best_idx;
                }
            }
        }
    }
    let map = ArgmaxMap {
        input_shape: x.shape(),
        output_shape: out.shape(),
        winners,
    };
    Ok((out, map))
}

/// Route each output gradient to the cell that won its window.
pub fn maxpool_backward<T: Scalar>(map: &ArgmaxMap, grad_out: &Tensor4<T>) -> Result<Tensor4<T>> {
    if grad_out.shape() != map.output_shape {
        return Err(Error::shape(format!(
            "maxpool_backward: grad_out {:?} != forward output {:?}",
            grad_out.shape(),
            map.output_shape
        )));
    }
    let (b, h, w, c) = map.input_shape;
    let mut grad_x = Tensor4::zeros(b, h, w, c)?;
    for (o, &winner) in map.winners.iter().enumerate() {
        grad_x.data_mut()[winner] = grad_x.data()[winner] + grad_out.data()[o];
    }
    Ok(grad_x)
}

/// Replicate every element into a 2x2 block.
pub fn upsample2x_nearest<T: Scalar>(x: &Tensor4<T>) -> Result<Tensor4<T>> {
    let (batch, height, width, channels) = x.shape();
    Tensor4::from_fn(batch, height * 2, width * 2, channels, |b, y, xx, c| {
        x.at(b, y / 2, xx / 2, c)
    })
}

/// Gradient of [`upsample2x_nearest`]: sum each 2x2 output block back onto its
/// source element.
pub fn upsample2x_nearest_backward<T: Scalar>(
    input_shape: (usize, usize, usize, usize),
    grad_out: &Tensor4<T>,
) -> Result<Tensor4<T>> {
    let (batch, height, width, channels) = input_shape;
    if grad_out.shape() != (batch, height * 2, width * 2, channels) {
        return Err(Error::shape(format!(
            "upsample backward: grad_out {:?} != ({batch}, {}, {}, {channels})",
            grad_out.shape(),
            height * 2,
            width * 2
        )));
    }
    let mut grad_x = Tensor4::zeros(batch, height, width, channels)?;
    for b in 0..batch {
        for y in 0..height * 2 {
            for x in 0..width * 2 {
                for c in 0..channels {
                    let i = grad_x.index(b, y / 2, x / 2, c);
                    grad_x.data_mut()[i] = grad_x.data()[i] + grad_out.at(b, y, x, c);
                }
            }
        }
    }
    Ok(grad_x)
}

//! Convolution kernel descriptions shared by every conv variant.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The three filter shapes used by the networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    /// Full cross-channel filter bank, weights `(kh, kw, c_in, c_out)`.
    Standard,
    /// One spatial filter per channel, no channel mixing, weights `(kh, kw, c)`.
    Depthwise,
    /// 1x1 channel mixer, weights `(c_in, c_out)`.
    Pointwise,
}

/// Zero-padding policy for spatial ops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PadMode {
    /// No padding; output shrinks by `k - 1` at stride 1.
    Valid,
    /// Zero-pad so the output spatial dim is `ceil(in / stride)`.
    SameZero,
}

/// A convolution filter: weights in row-major layout per [`KernelKind`], plus
/// an optional per-output-channel bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    kind: KernelKind,
    kh: usize,
    kw: usize,
    in_channels: usize,
    out_channels: usize,
    weights: Vec<T>,
    bias: Option<Vec<T>>,
}

impl<T: Scalar> Kernel<T> {
    pub fn standard(
        kh: usize,
        kw: usize,
        in_channels: usize,
        out_channels: usize,
        weights: Vec<T>,
        bias: Option<Vec<T>>,
    ) -> Result<Self> {
        let expect = kh * kw * in_channels * out_channels;
        if weights.len() != expect {
            return Err(Error::shape(format!(
                "standard kernel needs {kh}*{kw}*{in_channels}*{out_channels} = {expect} weights, got {}",
                weights.len()
            )));
        }
        Self::check_dims(kh, kw, in_channels, out_channels)?;
        Self::check_bias(&bias, out_channels)?;
        Ok(Self { kind: KernelKind::Standard, kh, kw, in_channels, out_channels, weights, bias })
    }

    pub fn depthwise(
        kh: usize,
        kw: usize,
        channels: usize,
        weights: Vec<T>,
        bias: Option<Vec<T>>,
    ) -> Result<Self> {
        let expect = kh * kw * channels;
        if weights.len() != expect {
            return Err(Error::shape(format!(
                "depthwise kernel needs {kh}*{kw}*{channels} = {expect} weights, got {}",
                weights.len()
            )));
        }
        Self::check_dims(kh, kw, channels, channels)?;
        Self::check_bias(&bias, channels)?;
        Ok(Self {
            kind: KernelKind::Depthwise,
            kh,
            kw,
            in_channels: channels,
            out_channels: channels,
            weights,
            bias,
        })
    }

    pub fn pointwise(
        in_channels: usize,
        out_channels: usize,
        weights: Vec<T>,
        bias: Option<Vec<T>>,
    ) -> Result<Self> {
        let expect = in_channels * out_channels;
        if weights.len() != expect {
            return Err(Error::shape(format!(
                "pointwise kernel needs {in_channels}*{out_channels} = {expect} weights, got {}",
                weights.len()
            )));
        }
        Self::check_dims(1, 1, in_channels, out_channels)?;
        Self::check_bias(&bias, out_channels)?;
        Ok(Self { kind: KernelKind::Pointwise, kh: 1, kw: 1, in_channels, out_channels, weights, bias })
    }

    fn check_dims(kh: usize, kw: usize, c_in: usize, c_out: usize) -> Result<()> {
        if kh == 0 || kw == 0 || c_in == 0 || c_out == 0 {
            return Err(Error::shape(format!(
                "kernel dims must be >= 1, got {kh}x{kw}, {c_in} -> {c_out}"
            )));
        }
        Ok(())
    }

    fn check_bias(bias: &Option<Vec<T>>, out_channels: usize) -> Result<()> {
        if let Some(b) = bias {
            if b.len() != out_channels {
                return Err(Error::shape(format!(
                    "bias length {} != out_channels {out_channels}",
                    b.len()
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn spatial(&self) -> (usize, usize) {
        (self.kh, self.kw)
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub fn bias(&self) -> Option<&[T]> {
        self.bias.as_deref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut [T]> {
        self.bias.as_deref_mut()
    }

    #[inline]
    pub(crate) fn w_standard(&self, ky: usize, kx: usize, ci: usize, co: usize) -> T {
        self.weights[((ky * self.kw + kx) * self.in_channels + ci) * self.out_channels + co]
    }

    #[inline]
    pub(crate) fn w_depthwise(&self, ky: usize, kx: usize, c: usize) -> T {
        self.weights[(ky * self.kw + kx) * self.in_channels + c]
    }

    #[inline]
    pub(crate) fn bias_at(&self, co: usize) -> T {
        match &self.bias {
            Some(b) => b[co],
            None => T::zero(),
        }
    }

    /// Trainable parameter count: weights plus bias when present.
    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.as_ref().map_or(0, |b| b.len())
    }
}

/// Gradients for one kernel, in the kernel's own weight layout.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGrad<T> {
    pub weights: Vec<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Scalar> KernelGrad<T> {
    pub(crate) fn zeros_like(k: &Kernel<T>) -> Self {
        Self {
            weights: vec![T::zero(); k.weights().len()],
            bias: k.bias().map(|b| vec![T::zero(); b.len()]),
        }
    }
}

/// Output length along one spatial axis, with the padding applied on that axis.
///
/// `valid`: `floor((in - k)/stride) + 1`, erroring when `k > in` or the result
/// would be empty. `same-zero`: `ceil(in / stride)`.
pub fn out_dim(in_dim: usize, k: usize, stride: usize, pad: PadMode) -> Result<usize> {
    if stride == 0 {
        return Err(Error::shape("stride must be >= 1".to_string()));
    }
    match pad {
        PadMode::Valid => {
            if k > in_dim {
                return Err(Error::shape(format!(
                    "window {k} larger than input {in_dim} with valid padding"
                )));
            }
            Ok((in_dim - k) / stride + 1)
        }
        PadMode::SameZero => Ok(in_dim.div_ceil(stride)),
    }
}

/// Leading pad (top/left) along one axis for the given policy.
pub fn pad_before(in_dim: usize, k: usize, stride: usize, pad: PadMode) -> Result<usize> {
    match pad {
        PadMode::Valid => Ok(0),
        PadMode::SameZero => {
            let out = out_dim(in_dim, k, stride, pad)?;
            let total = ((out - 1) * stride + k).saturating_sub(in_dim);
            Ok(total / 2)
        }
    }
}

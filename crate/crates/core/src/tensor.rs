//! Dense batched feature maps and single 2D slices.
//!
//! [`Tensor4`] is the universal layer currency: a batch of 2D feature maps in
//! row-major `(batch, height, width, channels)` order. [`Slice2`] is one 2D
//! image, used at the volume/pipeline boundary.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Batch of 2D feature maps, dense row-major `(batch, height, width, channels)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4<T> {
    batch: usize,
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Scalar> Tensor4<T> {
    /// Build a tensor from raw data; the length must equal `b*h*w*c` and every
    /// dimension must be at least 1.
    pub fn new(batch: usize, height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if batch == 0 || height == 0 || width == 0 || channels == 0 {
            return Err(Error::shape(format!(
                "tensor dims must be >= 1, got {batch}x{height}x{width}x{channels}"
            )));
        }
        let expect = batch * height * width * channels;
        if data.len() != expect {
            return Err(Error::shape(format!(
                "tensor data length {} != {batch}*{height}*{width}*{channels} = {expect}",
                data.len()
            )));
        }
        Ok(Self { batch, height, width, channels, data })
    }

    pub fn zeros(batch: usize, height: usize, width: usize, channels: usize) -> Result<Self> {
        Self::new(batch, height, width, channels, vec![T::zero(); batch * height * width * channels])
    }

    /// Fill from a closure over `(b, y, x, c)`.
    pub fn from_fn(
        batch: usize,
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(batch * height * width * channels);
        for b in 0..batch {
            for y in 0..height {
                for x in 0..width {
                    for c in 0..channels {
                        data.push(f(b, y, x, c));
                    }
                }
            }
        }
        Self::new(batch, height, width, channels, data)
    }

    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.batch, self.height, self.width, self.channels)
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, b: usize, y: usize, x: usize, c: usize) -> usize {
        ((b * self.height + y) * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn at(&self, b: usize, y: usize, x: usize, c: usize) -> T {
        self.data[self.index(b, y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, b: usize, y: usize, x: usize, c: usize, v: T) {
        let i = self.index(b, y, x, c);
        self.data[i] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Reshape `(b, h, w, c)` into `(b, 1, 1, h*w*c)`; the row-major layout
    /// makes this a relabeling, not a copy of reordered data.
    pub fn flatten_features(&self) -> Tensor4<T> {
        Tensor4 {
            batch: self.batch,
            height: 1,
            width: 1,
            channels: self.height * self.width * self.channels,
            data: self.data.clone(),
        }
    }

    /// Inverse of [`Tensor4::flatten_features`] for a known spatial shape.
    pub fn unflatten_features(&self, height: usize, width: usize, channels: usize) -> Result<Tensor4<T>> {
        Tensor4::new(self.batch, height, width, channels, self.data.clone())
    }

    /// Elementwise sum; shapes must match.
    pub fn add(&self, other: &Tensor4<T>) -> Result<Tensor4<T>> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "add: {:?} vs {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| a + b)
            .collect();
        Tensor4::new(self.batch, self.height, self.width, self.channels, data)
    }

    /// Zero-pad height/width up to `(h, w)`, content anchored at the origin.
    pub fn zero_pad_hw(&self, h: usize, w: usize) -> Result<Tensor4<T>> {
        if h < self.height || w < self.width {
            return Err(Error::shape(format!(
                "pad target {h}x{w} smaller than {}x{}",
                self.height, self.width
            )));
        }
        let mut out = Tensor4::zeros(self.batch, h, w, self.channels)?;
        for b in 0..self.batch {
            for y in 0..self.height {
                for x in 0..self.width {
                    for c in 0..self.channels {
                        out.set(b, y, x, c, self.at(b, y, x, c));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Keep the origin-anchored `(h, w)` region.
    pub fn crop_hw(&self, h: usize, w: usize) -> Result<Tensor4<T>> {
        if h > self.height || w > self.width {
            return Err(Error::shape(format!(
                "crop target {h}x{w} larger than {}x{}",
                self.height, self.width
            )));
        }
        Tensor4::from_fn(self.batch, h, w, self.channels, |b, y, x, c| self.at(b, y, x, c))
    }

    /// Stack single-batch tensors of identical spatial shape along the batch axis.
    pub fn stack(items: &[Tensor4<T>]) -> Result<Tensor4<T>> {
        let first = items
            .first()
            .ok_or_else(|| Error::shape("stack of zero tensors".to_string()))?;
        let (_, h, w, c) = first.shape();
        let mut data = Vec::with_capacity(items.iter().map(|t| t.len()).sum());
        let mut batch = 0;
        for t in items {
            if (t.height, t.width, t.channels) != (h, w, c) {
                return Err(Error::shape(format!(
                    "stack: {:?} vs {:?}",
                    t.shape(),
                    first.shape()
                )));
            }
            batch += t.batch;
            data.extend_from_slice(&t.data);
        }
        Tensor4::new(batch, h, w, c, data)
    }

    /// Extract batch element `b` as a single-batch tensor.
    pub fn batch_item(&self, b: usize) -> Tensor4<T> {
        let per = self.height * self.width * self.channels;
        Tensor4 {
            batch: 1,
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data[b * per..(b + 1) * per].to_vec(),
        }
    }
}

/// One 2D image in row-major `(height, width)` order, single channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice2<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Copy> Slice2<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "slice data length {} != {height}*{width}",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> T {
        self.data[y * self.width + x]
    }
}

impl<T: Scalar> Slice2<T> {
    pub fn filled(height: usize, width: usize, v: T) -> Self {
        Self { height, width, data: vec![v; height * width] }
    }

    /// Lift into a `(1, h, w, 1)` tensor.
    pub fn to_tensor(&self) -> Tensor4<T> {
        Tensor4 {
            batch: 1,
            height: self.height,
            width: self.width,
            channels: 1,
            data: self.data.clone(),
        }
    }

    /// Single-channel, single-batch tensor back to a slice.
    pub fn from_tensor(t: &Tensor4<T>) -> Result<Self> {
        let (b, h, w, c) = t.shape();
        if b != 1 || c != 1 {
            return Err(Error::shape(format!(
                "expected (1, h, w, 1) tensor, got {:?}",
                t.shape()
            )));
        }
        Slice2::new(h, w, t.data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_lengths_and_zero_dims() {
        assert!(Tensor4::<f32>::new(1, 2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Tensor4::<f32>::new(0, 2, 2, 1, vec![]).is_err());
    }

    #[test]
    fn index_is_row_major_nhwc() {
        let t = Tensor4::<f32>::from_fn(2, 2, 3, 2, |b, y, x, c| {
            (b * 1000 + y * 100 + x * 10 + c) as f32
        })
        .unwrap();
        assert_eq!(t.at(1, 1, 2, 1), 1121.0);
        assert_eq!(t.index(0, 0, 0, 1), 1);
        assert_eq!(t.index(0, 0, 1, 0), 2);
        assert_eq!(t.index(0, 1, 0, 0), 6);
        assert_eq!(t.index(1, 0, 0, 0), 12);
    }

    #[test]
    fn pad_then_crop_round_trips() {
        let t = Tensor4::<f64>::from_fn(1, 3, 4, 2, |_, y, x, c| (y * 8 + x * 2 + c) as f64).unwrap();
        let padded = t.zero_pad_hw(5, 6).unwrap();
        assert_eq!(padded.at(0, 4, 5, 1), 0.0);
        assert_eq!(padded.crop_hw(3, 4).unwrap(), t);
    }

    #[test]
    fn flatten_is_layout_preserving() {
        let t = Tensor4::<f32>::from_fn(2, 2, 2, 3, |b, y, x, c| (b * 12 + y * 6 + x * 3 + c) as f32)
            .unwrap();
        let flat = t.flatten_features();
        assert_eq!(flat.shape(), (2, 1, 1, 12));
        assert_eq!(flat.data(), t.data());
        assert_eq!(flat.unflatten_features(2, 2, 3).unwrap(), t);
    }

    #[test]
    fn stack_concatenates_batches() {
        let a = Tensor4::<f32>::from_fn(1, 2, 2, 1, |_, y, x, _| (y * 2 + x) as f32).unwrap();
        let b = Tensor4::<f32>::from_fn(1, 2, 2, 1, |_, y, x, _| (10 + y * 2 + x) as f32).unwrap();
        let s = Tensor4::stack(&[a.clone(), b]).unwrap();
        assert_eq!(s.shape(), (2, 2, 2, 1));
        assert_eq!(s.batch_item(0), a);
        assert_eq!(s.at(1, 0, 1, 0), 11.0);
    }
}

//! 3D volumes and their lossless decomposition into anatomical plane stacks.
//!
//! Axis convention (fixed and documented so external masks align): `X` runs
//! left-right, `Y` anterior-posterior, `Z` superior-inferior. Voxels are
//! stored x-major: `index = (x * Y + y) * Z + z`.
//!
//! Plane geometry for a volume of dims `(X, Y, Z)`:
//! - axial: `Z` slices of `X x Y`, slice `k` is `v[., ., k]`
//! - sagittal: `X` slices of `Y x Z`, slice `k` is `v[k, ., .]`
//! - coronal: `Y` slices of `X x Z`, slice `k` is `v[., k, .]`

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Slice2;

/// The three orthogonal anatomical planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Axial,
    Sagittal,
    Coronal,
}

pub const ALL_PLANES: [Plane; 3] = [Plane::Axial, Plane::Sagittal, Plane::Coronal];

impl Plane {
    /// Which volume axis enumerates the slices of this plane (0 = X, 1 = Y, 2 = Z).
    pub fn index_axis(self) -> usize {
        match self {
            Plane::Axial => 2,
            Plane::Sagittal => 0,
            Plane::Coronal => 1,
        }
    }

    pub fn slice_count(self, dims: (usize, usize, usize)) -> usize {
        match self {
            Plane::Axial => dims.2,
            Plane::Sagittal => dims.0,
            Plane::Coronal => dims.1,
        }
    }

    /// (height, width) of one slice of this plane.
    pub fn slice_hw(self, dims: (usize, usize, usize)) -> (usize, usize) {
        match self {
            Plane::Axial => (dims.0, dims.1),
            Plane::Sagittal => (dims.1, dims.2),
            Plane::Coronal => (dims.0, dims.2),
        }
    }

    /// Map (slice, row, col) back to the voxel coordinate it came from.
    pub fn voxel_of(self, slice: usize, row: usize, col: usize) -> (usize, usize, usize) {
        match self {
            Plane::Axial => (row, col, slice),
            Plane::Sagittal => (slice, row, col),
            Plane::Coronal => (row, slice, col),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Plane::Axial => "axial",
            Plane::Sagittal => "sagittal",
            Plane::Coronal => "coronal",
        }
    }
}

impl std::str::FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "axial" => Ok(Plane::Axial),
            "sagittal" => Ok(Plane::Sagittal),
            "coronal" => Ok(Plane::Coronal),
            other => Err(Error::Config(format!("unknown plane {other:?}"))),
        }
    }
}

/// Volume-shaped binary field (lesion mask or prediction).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask3 {
    dims: (usize, usize, usize),
    data: Vec<u8>,
}

impl Mask3 {
    pub fn new(dims: (usize, usize, usize), data: Vec<u8>) -> Result<Self> {
        let expect = dims.0 * dims.1 * dims.2;
        if data.len() != expect {
            return Err(Error::shape(format!(
                "mask data length {} != {}*{}*{} = {expect}",
                data.len(),
                dims.0,
                dims.1,
                dims.2
            )));
        }
        if let Some(bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::shape(format!("mask values must be 0 or 1, found {bad}")));
        }
        Ok(Self { dims, data })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        Self { dims, data: vec![0u8; dims.0 * dims.1 * dims.2] }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.dims.1 + y) * self.dims.2 + z
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> u8 {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: u8) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }

    pub fn count_positives(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

/// A 3D scalar field with an optional binary lesion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    dims: (usize, usize, usize),
    data: Vec<T>,
    mask: Option<Mask3>,
}

impl<T: Scalar> Volume<T> {
    pub fn new(dims: (usize, usize, usize), data: Vec<T>) -> Result<Self> {
        let expect = dims.0 * dims.1 * dims.2;
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(Error::shape(format!("volume dims must be >= 1, got {dims:?}")));
        }
        if data.len() != expect {
            return Err(Error::shape(format!(
                "volume data length {} != {}*{}*{} = {expect}",
                data.len(),
                dims.0,
                dims.1,
                dims.2
            )));
        }
        Ok(Self { dims, data, mask: None })
    }

    pub fn zeros(dims: (usize, usize, usize)) -> Result<Self> {
        Self::new(dims, vec![T::zero(); dims.0 * dims.1 * dims.2])
    }

    pub fn with_mask(mut self, mask: Mask3) -> Result<Self> {
        if mask.dims() != self.dims {
            return Err(Error::shape(format!(
                "mask dims {:?} != volume dims {:?}",
                mask.dims(),
                self.dims
            )));
        }
        self.mask = Some(mask);
        Ok(self)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn mask(&self) -> Option<&Mask3> {
        self.mask.as_ref()
    }

    pub fn take_mask(&mut self) -> Option<Mask3> {
        self.mask.take()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.dims.1 + y) * self.dims.2 + z
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: T) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }
}

/// Ordered slices of one plane; elements are generic so the same container
/// carries intensities (`T`), probabilities (`T`), and binary masks (`u8`).
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneStack<E> {
    plane: Plane,
    slice_h: usize,
    slice_w: usize,
    slices: Vec<Vec<E>>,
}

impl<E: Copy> PlaneStack<E> {
    pub fn new(plane: Plane, slice_h: usize, slice_w: usize, slices: Vec<Vec<E>>) -> Result<Self> {
        for (i, s) in slices.iter().enumerate() {
            if s.len() != slice_h * slice_w {
                return Err(Error::shape(format!(
                    "slice {i} has {} elements, expected {slice_h}*{slice_w}",
                    s.len()
                )));
            }
        }
        Ok(Self { plane, slice_h, slice_w, slices })
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn index_axis(&self) -> usize {
        self.plane.index_axis()
    }

    pub fn slice_h(&self) -> usize {
        self.slice_h
    }

    pub fn slice_w(&self) -> usize {
        self.slice_w
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slices(&self) -> &[Vec<E>] {
        &self.slices
    }

    #[inline]
    pub fn at(&self, slice: usize, row: usize, col: usize) -> E {
        self.slices[slice][row * self.slice_w + col]
    }

    pub fn slice2(&self, slice: usize) -> Slice2<E> {
        Slice2::new(self.slice_h, self.slice_w, self.slices[slice].clone())
            .expect("stack slices are validated on construction")
    }

    /// Dims this stack must reassemble into, checked against a target.
    fn check_dims(&self, dims: (usize, usize, usize)) -> Result<()> {
        let want_count = self.plane.slice_count(dims);
        let want_hw = self.plane.slice_hw(dims);
        if self.slices.len() != want_count || (self.slice_h, self.slice_w) != want_hw {
            return Err(Error::shape(format!(
                "{} stack of {} slices ({}x{}) does not reassemble into {:?}",
                self.plane.name(),
                self.slices.len(),
                self.slice_h,
                self.slice_w,
                dims
            )));
        }
        Ok(())
    }
}

/// Decompose a volume into a stack of 2D slices for one plane. Every voxel
/// lands in exactly one slice.
pub fn slice_volume<T: Scalar>(v: &Volume<T>, plane: Plane) -> PlaneStack<T> {
    slice_field(v.dims(), |x, y, z| v.at(x, y, z), plane)
}

/// Decompose a binary mask the same way.
pub fn slice_mask(m: &Mask3, plane: Plane) -> PlaneStack<u8> {
    slice_field(m.dims(), |x, y, z| m.at(x, y, z), plane)
}

fn slice_field<E: Copy>(
    dims: (usize, usize, usize),
    at: impl Fn(usize, usize, usize) -> E,
    plane: Plane,
) -> PlaneStack<E> {
    let count = plane.slice_count(dims);
    let (h, w) = plane.slice_hw(dims);
    let mut slices = Vec::with_capacity(count);
    for k in 0..count {
        let mut s = Vec::with_capacity(h * w);
        for row in 0..h {
            for col in 0..w {
                let (x, y, z) = plane.voxel_of(k, row, col);
                s.push(at(x, y, z));
            }
        }
        slices.push(s);
    }
    PlaneStack { plane, slice_h: h, slice_w: w, slices }
}

/// Rebuild the volume-shaped field a stack was sliced from. Exact inverse of
/// [`slice_volume`] / [`slice_mask`] for matching dims.
pub fn reassemble<E: Copy + Default>(stack: &PlaneStack<E>, dims: (usize, usize, usize)) -> Result<Vec<E>> {
    stack.check_dims(dims)?;
    let mut out = vec![E::default(); dims.0 * dims.1 * dims.2];
    for (k, slice) in stack.slices.iter().enumerate() {
        for row in 0..stack.slice_h {
            for col in 0..stack.slice_w {
                let (x, y, z) = stack.plane.voxel_of(k, row, col);
                out[(x * dims.1 + y) * dims.2 + z] = slice[row * stack.slice_w + col];
            }
        }
    }
    Ok(out)
}

/// Reassemble a binary stack into a [`Mask3`].
pub fn reassemble_mask(stack: &PlaneStack<u8>, dims: (usize, usize, usize)) -> Result<Mask3> {
    Mask3::new(dims, reassemble(stack, dims)?)
}

/// Min-max normalize intensities into `[0, 1]`; constant volumes map to all
/// zeros. The mask is carried through untouched.
pub fn normalize_volume<T: Scalar>(v: &Volume<T>) -> Result<Volume<T>> {
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for &x in v.data() {
        if !x.is_finite() {
            return Err(Error::Data("volume contains non-finite intensities".to_string()));
        }
        if x < lo {
            lo = x;
        }
        if x > hi {
            hi = x;
        }
    }
    let range = hi - lo;
    let data = if range > T::zero() {
        v.data().iter().map(|&x| (x - lo) / range).collect()
    } else {
        vec![T::zero(); v.data().len()]
    };
    let mut out = Volume::new(v.dims(), data)?;
    if let Some(m) = v.mask() {
        out = out.with_mask(m.clone())?;
    }
    Ok(out)
}

//! Per-voxel vote across the three plane segmentations.
//!
//! Each plane's probability maps are binarized first (threshold `tau`,
//! inclusive `>=`), reassembled into voxel space, and then combined by a vote:
//! a voxel is a lesion iff at least `T` of the three planes marked it. The
//! default `T = 3` is exact three-way intersection, which can only remove
//! false positives relative to any single plane.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Slice2;
use crate::volume::{reassemble, Mask3, Plane, PlaneStack};

/// Per-plane probability maps plus the binarization threshold.
#[derive(Debug, Clone)]
pub struct PlanePrediction<T> {
    plane: Plane,
    maps: Vec<Slice2<T>>,
    threshold: T,
}

impl<T: Scalar> PlanePrediction<T> {
    pub fn new(plane: Plane, maps: Vec<Slice2<T>>, threshold: T) -> Result<Self> {
        if threshold <= T::zero() || threshold >= T::one() {
            return Err(Error::Config(format!(
                "binarization threshold must be in (0, 1), got {threshold}"
            )));
        }
        if let Some(first) = maps.first() {
            let (h, w) = (first.height(), first.width());
            for (i, m) in maps.iter().enumerate() {
                if (m.height(), m.width()) != (h, w) {
                    return Err(Error::shape(format!(
                        "prediction map {i} is {}x{}, expected {h}x{w}",
                        m.height(),
                        m.width()
                    )));
                }
            }
        }
        Ok(Self { plane, maps, threshold })
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn maps(&self) -> &[Slice2<T>] {
        &self.maps
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }
}

/// Vote threshold `T` in `{1, 2, 3}`; 3 accepts only unanimous voxels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AggregationRule {
    vote_threshold: u8,
}

impl AggregationRule {
    pub fn new(vote_threshold: u8) -> Result<Self> {
        if !(1..=3).contains(&vote_threshold) {
            return Err(Error::Config(format!(
                "vote threshold must be 1, 2, or 3, got {vote_threshold}"
            )));
        }
        Ok(Self { vote_threshold })
    }

    /// Unanimity, the default.
    pub fn unanimous() -> Self {
        Self { vote_threshold: 3 }
    }

    pub fn vote_threshold(&self) -> u8 {
        self.vote_threshold
    }
}

impl Default for AggregationRule {
    fn default() -> Self {
        Self::unanimous()
    }
}

/// Threshold each probability map at `tau`; a pixel is positive iff `p >= tau`.
pub fn binarize<T: Scalar>(pred: &PlanePrediction<T>) -> Result<PlaneStack<u8>> {
    let (h, w) = pred
        .maps
        .first()
        .map(|m| (m.height(), m.width()))
        .unwrap_or((1, 1));
    let slices = pred
        .maps
        .iter()
        .map(|m| m.data().iter().map(|&p| u8::from(p >= pred.threshold)).collect())
        .collect();
    PlaneStack::new(pred.plane, h, w, slices)
}

/// Combine three binarized plane stacks into one volume-shaped mask: voxel is
/// 1 iff at least `rule.vote_threshold()` planes voted 1 there.
pub fn aggregate_planes(
    ax: &PlaneStack<u8>,
    sag: &PlaneStack<u8>,
    cor: &PlaneStack<u8>,
    dims: (usize, usize, usize),
    rule: AggregationRule,
) -> Result<Mask3> {
    let a = reassemble(ax, dims)?;
    let s = reassemble(sag, dims)?;
    let c = reassemble(cor, dims)?;
    let t = rule.vote_threshold();
    let data = a
        .iter()
        .zip(s.iter())
        .zip(c.iter())
        .map(|((&va, &vs), &vc)| u8::from(va + vs + vc >= t))
        .collect();
    Mask3::new(dims, data)
}

/// Single-plane 3D mask, the no-aggregation baseline.
pub fn per_plane_mask(stack: &PlaneStack<u8>, dims: (usize, usize, usize)) -> Result<Mask3> {
    Mask3::new(dims, reassemble(stack, dims)?)
}

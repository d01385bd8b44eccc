//! Manifest-driven data assembly for training.

use std::collections::HashMap;
use std::path::Path;

use triseg_core::error::{Error, Result};
use triseg_core::io::{load_case, CaseRecord, SliceDataset, Split};
use triseg_core::scalar::Scalar;
use triseg_core::tensor::Tensor4;
use triseg_core::train::Sample;
use triseg_core::volume::{normalize_volume, slice_mask, slice_volume, Plane, PlaneStack, Volume};

/// Load and min-max normalize every case of one split.
pub fn load_split<T: Scalar>(
    records: &[CaseRecord],
    root: &Path,
    split: Split,
) -> Result<Vec<(String, Volume<T>)>> {
    records
        .iter()
        .filter(|r| r.split == split)
        .map(|r| Ok((r.case_id.clone(), normalize_volume(&load_case(r, root)?)?)))
        .collect()
}

/// Intensity and mask stacks of one plane for a set of cases.
pub struct PlaneStacks<T> {
    stacks: HashMap<String, (PlaneStack<T>, Option<PlaneStack<u8>>)>,
}

impl<T: Scalar> PlaneStacks<T> {
    pub fn build(cases: &[(String, Volume<T>)], plane: Plane) -> Self {
        let stacks = cases
            .iter()
            .map(|(id, v)| {
                (id.clone(), (slice_volume(v, plane), v.mask().map(|m| slice_mask(m, plane))))
            })
            .collect();
        Self { stacks }
    }

    /// Turn dataset entries into training samples, padding slices up to
    /// `input_hw`. Classification targets are the scalar label; segmentation
    /// targets are the padded mask slice.
    pub fn samples(
        &self,
        ds: &SliceDataset,
        input_hw: (usize, usize),
        segmentation: bool,
    ) -> Result<Vec<Sample<T>>> {
        ds.entries
            .iter()
            .map(|e| {
                let (ints, masks) = self.stacks.get(&e.case_id).ok_or_else(|| {
                    Error::Data(format!("case {} not among the loaded volumes", e.case_id))
                })?;
                let input =
                    ints.slice2(e.slice_index).to_tensor().zero_pad_hw(input_hw.0, input_hw.1)?;
                let target = if segmentation {
                    let m = masks.as_ref().ok_or_else(|| {
                        Error::Data(format!("case {} has no mask for segmentation", e.case_id))
                    })?;
                    let slice = m.slice2(e.slice_index);
                    Tensor4::new(
                        1,
                        slice.height(),
                        slice.width(),
                        1,
                        slice.data().iter().map(|&v| T::from_f64_lossy(f64::from(v))).collect(),
                    )?
                    .zero_pad_hw(input_hw.0, input_hw.1)?
                } else {
                    Tensor4::new(
                        1,
                        1,
                        1,
                        1,
                        vec![T::from_f64_lossy(f64::from(u8::from(e.has_lesion)))],
                    )?
                };
                Ok(Sample { input, target })
            })
            .collect()
    }
}

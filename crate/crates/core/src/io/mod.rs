//! Volume ingestion, dataset assembly, and the case manifest.

mod dataset;
mod nifti;
mod raw;
mod synth;

pub use dataset::{
    balance_for_classification, extract_slices, lesion_only, read_entries, split_cases,
    split_dataset, write_entries, SliceDataset, SliceEntry,
};
pub use nifti::read_nifti;
pub use raw::{read_raw, write_raw, AXIS_CONVENTION};
pub use synth::{synth_volume, Ellipsoid, LesionSpec, SynthCase};

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volume::{Mask3, Volume};

/// Which pool a case belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    /// 2D slice pool used for training.
    Train2d,
    /// 2D slice pool held out for validation/testing.
    Test2d,
    /// Whole cases held out for 3D evaluation.
    Test3d,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train2d => "train2d",
            Split::Test2d => "test2d",
            Split::Test3d => "test3d",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train2d" => Ok(Split::Train2d),
            "test2d" => Ok(Split::Test2d),
            "test3d" => Ok(Split::Test3d),
            other => Err(Error::Format(format!("unknown split {other:?}"))),
        }
    }
}

/// One case in a manifest. Paths are relative to the manifest's directory; a
/// missing mask path means the volume file carries the mask inline (raw
/// format) or has none.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseRecord {
    pub case_id: String,
    pub volume: PathBuf,
    pub mask: Option<PathBuf>,
    pub split: Split,
}

/// Write a manifest: one tab-separated line per case,
/// `case_id  split  volume_path  mask_path|-`.
pub fn write_manifest(records: &[CaseRecord], path: &Path) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.case_id,
            r.split.name(),
            r.volume.display(),
            r.mask.as_ref().map_or("-".to_string(), |m| m.display().to_string())
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Read a manifest written by [`write_manifest`].
pub fn read_manifest(path: &Path) -> Result<Vec<CaseRecord>> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Format(format!(
                "{}:{}: expected 4 tab-separated fields, got {}",
                path.display(),
                ln + 1,
                fields.len()
            )));
        }
        records.push(CaseRecord {
            case_id: fields[0].to_string(),
            split: fields[1].parse()?,
            volume: PathBuf::from(fields[2]),
            mask: if fields[3] == "-" { None } else { Some(PathBuf::from(fields[3])) },
        });
    }
    Ok(records)
}

fn is_nifti(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("nii"))
}

/// Load one case: the volume by format (NIfTI by `.nii` extension, raw
/// otherwise), plus its mask when the record names one. Dim mismatches are
/// reported with the case id.
pub fn load_case<T: Scalar>(record: &CaseRecord, root: &Path) -> Result<Volume<T>> {
    let vpath = root.join(&record.volume);
    let mut volume: Volume<T> =
        if is_nifti(&vpath) { read_nifti(&vpath)? } else { read_raw(&vpath)? };
    if let Some(mpath) = &record.mask {
        let mpath = root.join(mpath);
        let mask_vol: Volume<T> =
            if is_nifti(&mpath) { read_nifti(&mpath)? } else { read_raw(&mpath)? };
        if mask_vol.dims() != volume.dims() {
            return Err(Error::Data(format!(
                "case {}: mask dims {:?} != volume dims {:?}",
                record.case_id,
                mask_vol.dims(),
                volume.dims()
            )));
        }
        let half = crate::scalar::sc::<T>(0.5);
        let data = mask_vol.data().iter().map(|&v| u8::from(v > half)).collect();
        volume = volume.with_mask(Mask3::new(mask_vol.dims(), data)?)?;
    }
    Ok(volume)
}

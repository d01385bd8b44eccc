//! Native raw volume format: a dense little-endian body plus a TOML sidecar.
//!
//! The body at `path` holds the intensities (`f32` or `f64` little-endian,
//! matching the writer's precision) followed by the mask bytes (one `u8` per
//! voxel) when a mask is present. The sidecar at `path.meta` records dims,
//! dtype, endianness, the axis convention, and whether a mask follows.
//! `read_raw(write_raw(v))` is bit-exact for the writer's precision.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};
use crate::volume::{Mask3, Volume};

/// Axis convention string written into every sidecar.
pub const AXIS_CONVENTION: &str =
    "x=left-right, y=anterior-posterior, z=superior-inferior; x-major layout";

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    dims: (usize, usize, usize),
    dtype: String,
    endianness: String,
    axis_convention: String,
    mask: bool,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_os_string();
    s.push(".meta");
    PathBuf::from(s)
}

/// Write a volume (and its mask, when present) to `path` + `path.meta`.
pub fn write_raw<T: Scalar>(v: &Volume<T>, path: &Path) -> Result<()> {
    let dims = v.dims();
    let nvox = dims.0 * dims.1 * dims.2;
    let elem = if T::DTYPE == "f64" { 8 } else { 4 };
    let mut body = Vec::with_capacity(nvox * elem + if v.mask().is_some() { nvox } else { 0 });
    for &x in v.data() {
        if T::DTYPE == "f64" {
            body.extend_from_slice(&x.to_f64_lossy().to_le_bytes());
        } else {
            body.extend_from_slice(&(x.to_f64_lossy() as f32).to_le_bytes());
        }
    }
    if let Some(m) = v.mask() {
        body.extend_from_slice(m.data());
    }
    let meta = Sidecar {
        dims,
        dtype: T::DTYPE.to_string(),
        endianness: "little".to_string(),
        axis_convention: AXIS_CONVENTION.to_string(),
        mask: v.mask().is_some(),
    };
    fs::write(path, body)?;
    fs::write(
        sidecar_path(path),
        toml::to_string(&meta).map_err(|e| Error::Format(format!("sidecar encode: {e}")))?,
    )?;
    Ok(())
}

/// Read a volume written by [`write_raw`]. The stored dtype is converted to
/// `T` (widening `f32 -> f64` is lossless; narrowing truncates).
pub fn read_raw<T: Scalar>(path: &Path) -> Result<Volume<T>> {
    let meta_text = fs::read_to_string(sidecar_path(path)).map_err(|e| {
        Error::Format(format!("missing sidecar {}: {e}", sidecar_path(path).display()))
    })?;
    let meta: Sidecar =
        toml::from_str(&meta_text).map_err(|e| Error::Format(format!("sidecar parse: {e}")))?;
    if meta.endianness != "little" {
        return Err(Error::Unsupported(format!("endianness {:?}", meta.endianness)));
    }
    let elem = match meta.dtype.as_str() {
        "f32" => 4,
        "f64" => 8,
        other => return Err(Error::Unsupported(format!("raw dtype {other:?}"))),
    };
    let nvox = meta.dims.0 * meta.dims.1 * meta.dims.2;
    let expect = nvox * elem + if meta.mask { nvox } else { 0 };
    let body = fs::read(path)?;
    if body.len() != expect {
        return Err(Error::Format(format!(
            "raw body {} is {} bytes, sidecar dims {:?} demand {expect}",
            path.display(),
            body.len(),
            meta.dims
        )));
    }

    let mut data = Vec::with_capacity(nvox);
    for chunk in body[..nvox * elem].chunks_exact(elem) {
        let v = if elem == 4 {
            f64::from(f32::from_le_bytes(chunk.try_into().unwrap()))
        } else {
            f64::from_le_bytes(chunk.try_into().unwrap())
        };
        data.push(sc::<T>(v));
    }
    let mut vol = Volume::new(meta.dims, data)?;
    if meta.mask {
        vol = vol.with_mask(Mask3::new(meta.dims, body[nvox * elem..].to_vec())?)?;
    }
    Ok(vol)
}

//! Versioned binary checkpoint files.
//!
//! Byte layout (all little-endian):
//!
//! | offset | size | field                       |
//! |--------|------|-----------------------------|
//! | 0      | 4    | magic `"VRUW"`              |
//! | 4      | 4    | format version (`u32`, = 1) |
//! | 8      | 8    | spec digest (`u64`)         |
//! | 16     | 8    | parameter count (`u64`)     |
//! | 24     | 4n   | parameters (`f32` each)     |
//!
//! Parameters are stored as `f32` regardless of the runtime precision; loading
//! widens them back. The spec digest ties a checkpoint to the exact
//! architecture it was trained for.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{build_classifier, build_segmenter, ArchSpec, ModelKind, ModelParams};
use crate::scalar::{sc, Scalar};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"VRUW";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialize a model's parameters to `path`.
pub fn save_checkpoint<T: Scalar>(model: &ModelParams<T>, path: &Path) -> Result<()> {
    let params = model.params_flat();
    let mut bytes = Vec::with_capacity(24 + params.len() * 4);
    bytes.extend_from_slice(&CHECKPOINT_MAGIC);
    bytes.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    bytes.extend_from_slice(&model.spec().digest().to_le_bytes());
    bytes.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        bytes.extend_from_slice(&(p.to_f64_lossy() as f32).to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Rebuild a model from its spec and stored parameters, verifying the magic,
/// version, digest, and parameter count.
pub fn load_checkpoint<T: Scalar>(spec: &ArchSpec, path: &Path) -> Result<ModelParams<T>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 24 {
        return Err(Error::Format(format!(
            "checkpoint {} is {} bytes, shorter than the 24-byte header",
            path.display(),
            bytes.len()
        )));
    }
    if bytes[0..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format(format!(
            "checkpoint {}: bad magic {:?} at offset 0, expected {:?}",
            path.display(),
            &bytes[0..4],
            CHECKPOINT_MAGIC
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Unsupported(format!(
            "checkpoint {} has version {version}, this build reads version {CHECKPOINT_VERSION}",
            path.display()
        )));
    }
    let digest = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    if digest != spec.digest() {
        return Err(Error::Format(format!(
            "checkpoint {} was written for spec digest {digest:016x}, this spec is {:016x}",
            path.display(),
            spec.digest()
        )));
    }
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    if bytes.len() != 24 + count * 4 {
        return Err(Error::Format(format!(
            "checkpoint {}: header promises {count} parameters ({} bytes), file has {}",
            path.display(),
            24 + count * 4,
            bytes.len()
        )));
    }

    let mut params = Vec::with_capacity(count);
    for chunk in bytes[24..].chunks_exact(4) {
        params.push(sc::<T>(f64::from(f32::from_le_bytes(chunk.try_into().unwrap()))));
    }
    let mut model = match spec.kind {
        ModelKind::Classifier => build_classifier::<T>(spec, 0)?,
        ModelKind::Segmenter => build_segmenter::<T>(spec, 0)?,
    };
    model.set_params_flat(&params)?;
    Ok(model)
}

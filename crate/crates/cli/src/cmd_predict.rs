//! `triseg predict`: run the six-model pipeline over one volume.

use std::path::{Path, PathBuf};

use triseg_core::aggregate::AggregationRule;
use triseg_core::error::{Error, Result};
use triseg_core::io::{read_nifti, read_raw, write_raw};
use triseg_core::model::ArchSpec;
use triseg_core::pipeline::{process_volume, run_report, PipelineConfig, PlaneModelPair};
use triseg_core::scalar::{sc, Scalar};
use triseg_core::train::load_checkpoint;
use triseg_core::volume::{Mask3, Volume, ALL_PLANES};

pub struct PredictConfig {
    pub volume: PathBuf,
    pub models: PathBuf,
    pub out: PathBuf,
    pub report: Option<PathBuf>,
    pub vote_threshold: u8,
    pub tau: f64,
    pub gate: f64,
    pub min_pixels: usize,
    pub no_aggregate: bool,
    pub threads: usize,
}

fn load_volume<T: Scalar>(path: &Path) -> Result<Volume<T>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("nii")) {
        read_nifti(path)
    } else {
        read_raw(path)
    }
}

/// A mask written to disk is a raw volume with 0/1 intensities and the mask
/// inline, so it loads back through either path.
fn write_mask<T: Scalar>(mask: &Mask3, path: &Path) -> Result<()> {
    let vol = Volume::<T>::new(
        mask.dims(),
        mask.data().iter().map(|&v| T::from_f64_lossy(f64::from(v))).collect(),
    )?
    .with_mask(mask.clone())?;
    write_raw(&vol, path)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
    let ext = path.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    path.with_file_name(format!("{stem}-{suffix}{ext}"))
}

pub fn run<T: Scalar>(cfg: &PredictConfig) -> Result<()> {
    // All six checkpoints (and arch files) must be present before any work.
    let mut missing = Vec::new();
    let mut paths = Vec::new();
    for plane in ALL_PLANES {
        for task in ["classify", "segment"] {
            let base = format!("{}-{task}", plane.name());
            let ckpt = cfg.models.join(format!("{base}.ckpt"));
            let arch = cfg.models.join(format!("{base}.arch.toml"));
            for p in [&ckpt, &arch] {
                if !p.exists() {
                    missing.push(p.display().to_string());
                }
            }
            paths.push((plane, ckpt, arch));
        }
    }
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "missing model files ({} of 6 model pairs incomplete): {}",
            missing.len(),
            missing.join(", ")
        )));
    }

    let mut pairs = Vec::new();
    for chunk in paths.chunks(2) {
        let (plane, cls_ckpt, cls_arch) = &chunk[0];
        let (_, seg_ckpt, seg_arch) = &chunk[1];
        let cls_spec = ArchSpec::from_toml_str(&std::fs::read_to_string(cls_arch)?)?;
        let seg_spec = ArchSpec::from_toml_str(&std::fs::read_to_string(seg_arch)?)?;
        pairs.push(PlaneModelPair::new(
            *plane,
            load_checkpoint::<T>(&cls_spec, cls_ckpt)?,
            load_checkpoint::<T>(&seg_spec, seg_ckpt)?,
        )?);
    }
    let pairs: [PlaneModelPair<T>; 3] =
        [pairs[0].clone(), pairs[1].clone(), pairs[2].clone()];

    let volume = load_volume::<T>(&cfg.volume)?;
    let pipe_cfg = PipelineConfig::<T> {
        gate_threshold: sc(cfg.gate),
        binarize_threshold: sc(cfg.tau),
        rule: AggregationRule::new(cfg.vote_threshold)?,
        min_lesion_pixels: cfg.min_pixels,
        threads: cfg.threads,
    };
    let result = process_volume(&pairs, &volume, &pipe_cfg)?;

    if let Some(parent) = cfg.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    for run in &result.planes {
        write_mask::<T>(&run.mask, &with_suffix(&cfg.out, run.plane.name()))?;
    }
    if !cfg.no_aggregate {
        write_mask::<T>(&result.aggregated, &cfg.out)?;
    }

    let report = run_report(&result);
    match &cfg.report {
        Some(path) => std::fs::write(path, &report)?,
        None => print!("{report}"),
    }
    println!(
        "wrote {}mask(s) next to {}",
        if cfg.no_aggregate { "per-plane " } else { "aggregated + per-plane " },
        cfg.out.display()
    );
    Ok(())
}

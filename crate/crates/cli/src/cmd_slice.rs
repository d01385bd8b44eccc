//! `triseg slice`: per-plane slice tallies and dataset extraction.

use std::path::PathBuf;

use triseg_core::error::Result;
use triseg_core::io::{
    balance_for_classification, extract_slices, lesion_only, read_manifest, write_entries, Split,
};
use triseg_core::volume::{Plane, ALL_PLANES};

use crate::args::TaskArg;
use crate::data::load_split;

pub struct SliceConfig {
    pub manifest: PathBuf,
    pub plane: Option<Plane>,
    pub task: Option<TaskArg>,
    pub out: Option<PathBuf>,
    pub balance_seed: u64,
}

pub fn run(cfg: &SliceConfig) -> Result<()> {
    let root = cfg.manifest.parent().unwrap_or(std::path::Path::new(".")).to_path_buf();
    let records = read_manifest(&cfg.manifest)?;
    let mut volumes = Vec::new();
    for split in [Split::Train2d, Split::Test2d] {
        volumes.extend(load_split::<f32>(&records, &root, split)?);
    }

    println!("plane\ttotal\tlesion\tnormal");
    for plane in ALL_PLANES {
        let ds = extract_slices(volumes.iter().map(|(id, v)| (id.as_str(), v)), plane);
        println!(
            "{}\t{}\t{}\t{}",
            plane.name(),
            ds.entries.len(),
            ds.lesion_count(),
            ds.normal_count()
        );
    }

    if let (Some(plane), Some(out)) = (cfg.plane, cfg.out.as_ref()) {
        let ds = extract_slices(volumes.iter().map(|(id, v)| (id.as_str(), v)), plane);
        let ds = match cfg.task {
            Some(TaskArg::Classify) => balance_for_classification(&ds, cfg.balance_seed)?,
            Some(TaskArg::Segment) => lesion_only(&ds),
            None => ds,
        };
        write_entries(&ds, out)?;
        println!(
            "wrote {} {} entries ({} lesion / {} normal) to {}",
            ds.entries.len(),
            plane.name(),
            ds.lesion_count(),
            ds.normal_count(),
            out.display()
        );
    }
    Ok(())
}

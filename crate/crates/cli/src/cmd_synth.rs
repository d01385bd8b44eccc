//! `triseg synth`: generate a seeded phantom dataset with case-level splits.

use std::path::PathBuf;

use triseg_core::error::Result;
use triseg_core::io::{split_cases, synth_volume, write_manifest, write_raw, CaseRecord, LesionSpec, Split};

pub struct SynthConfig {
    pub out: PathBuf,
    pub count: usize,
    pub dims: (usize, usize, usize),
    pub seed: u64,
    pub lesions: (usize, usize),
    pub radius: (f64, f64),
    pub holdout3d: f64,
    pub val2d: f64,
}

pub fn run(cfg: &SynthConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out)?;
    let spec = LesionSpec::new(cfg.lesions, cfg.radius);

    let ids: Vec<String> = (0..cfg.count).map(|i| format!("case{i:04}")).collect();
    let mut records = Vec::with_capacity(cfg.count);
    for (i, id) in ids.iter().enumerate() {
        let case = synth_volume::<f32>(cfg.seed.wrapping_add(i as u64), cfg.dims, &spec)?;
        let file = format!("{id}.vol");
        write_raw(&case.volume, &cfg.out.join(&file))?;
        records.push(CaseRecord {
            case_id: id.clone(),
            volume: PathBuf::from(file),
            mask: None,
            split: Split::Train2d,
        });
    }

    if !ids.is_empty() {
        let (pool, test3d) = split_cases(&ids, cfg.holdout3d, cfg.seed)?;
        let (_, test2d) = split_cases(&pool, cfg.val2d, cfg.seed.wrapping_add(1))?;
        for r in &mut records {
            if test3d.contains(&r.case_id) {
                r.split = Split::Test3d;
            } else if test2d.contains(&r.case_id) {
                r.split = Split::Test2d;
            }
        }
    }

    write_manifest(&records, &cfg.out.join("manifest.tsv"))?;
    println!(
        "wrote {} cases ({:?} voxels each) and manifest.tsv to {}",
        cfg.count,
        cfg.dims,
        cfg.out.display()
    );
    Ok(())
}

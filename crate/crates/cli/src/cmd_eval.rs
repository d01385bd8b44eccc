//! `triseg eval`: per-case and aggregate segmentation metrics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use triseg_core::error::{Error, Result};
use triseg_core::io::{read_nifti, read_raw};
use triseg_core::metrics::{evaluate_volume, summarize_cases, CaseMetrics, SuiteSummary};
use triseg_core::volume::{Mask3, Plane, ALL_PLANES};

pub struct EvalConfig {
    pub pred: Vec<PathBuf>,
    pub truth: Vec<PathBuf>,
    pub pred_axial: Vec<PathBuf>,
    pub pred_sagittal: Vec<PathBuf>,
    pub pred_coronal: Vec<PathBuf>,
    pub out: Option<PathBuf>,
}

/// Load a mask: the inline mask of a raw volume when present, otherwise
/// intensities binarized at 0.5.
fn load_mask(path: &Path) -> Result<Mask3> {
    let mut volume = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("nii")) {
        read_nifti::<f32>(path)?
    } else {
        read_raw::<f32>(path)?
    };
    if let Some(mask) = volume.take_mask() {
        return Ok(mask);
    }
    let data = volume.data().iter().map(|&v| u8::from(v > 0.5)).collect();
    Mask3::new(volume.dims(), data)
}

fn eval_section(preds: &[PathBuf], truths: &[PathBuf]) -> Result<Vec<CaseMetrics>> {
    preds
        .iter()
        .zip(truths)
        .map(|(p, t)| {
            let case_id = p.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
            let pred = load_mask(p)?;
            let truth = load_mask(t)?;
            evaluate_volume(&case_id, &pred, &truth)
                .map_err(|e| Error::Data(format!("case {case_id}: {e}")))
        })
        .collect()
}

fn format_summary(label: &str, s: &SuiteSummary, out: &mut String) {
    let _ = writeln!(out, "{label} ({} cases)", s.cases);
    let _ = writeln!(out, "  metric   \tmean \u{00b1} std");
    let _ = writeln!(out, "  dice     \t{:.4} \u{00b1} {:.4}", s.dice.mean, s.dice.std);
    let _ = writeln!(out, "  precision\t{:.4} \u{00b1} {:.4}", s.precision.mean, s.precision.std);
    let _ = writeln!(out, "  recall   \t{:.4} \u{00b1} {:.4}", s.recall.mean, s.recall.std);
}

pub fn run(cfg: &EvalConfig) -> Result<()> {
    if cfg.pred.len() != cfg.truth.len() || cfg.pred.is_empty() {
        return Err(Error::Config(format!(
            "eval needs matching --pred/--truth counts, got {} / {}",
            cfg.pred.len(),
            cfg.truth.len()
        )));
    }

    let mut sections: Vec<(String, Vec<CaseMetrics>)> =
        vec![("with-aggregation".to_string(), eval_section(&cfg.pred, &cfg.truth)?)];
    for (plane, preds) in [
        (Plane::Axial, &cfg.pred_axial),
        (Plane::Sagittal, &cfg.pred_sagittal),
        (Plane::Coronal, &cfg.pred_coronal),
    ] {
        if preds.is_empty() {
            continue;
        }
        if preds.len() != cfg.truth.len() {
            return Err(Error::Config(format!(
                "--pred-{} count {} != --truth count {}",
                plane.name(),
                preds.len(),
                cfg.truth.len()
            )));
        }
        sections.push((format!("without-aggregation ({})", plane.name()), eval_section(preds, &cfg.truth)?));
    }
    let _ = ALL_PLANES;

    let mut table = String::new();
    let mut record = String::from("section\tcase\tdice\tprecision\trecall\n");
    for (label, cases) in &sections {
        format_summary(label, &summarize_cases(cases), &mut table);
        for c in cases {
            let _ = writeln!(
                record,
                "{label}\t{}\t{:.6}\t{:.6}\t{:.6}",
                c.case_id, c.dice, c.precision, c.recall
            );
        }
    }
    for (label, cases) in &sections {
        let s = summarize_cases(cases);
        let _ = writeln!(
            record,
            "summary\t{label}\t{:.6}\t{:.6}\t{:.6}",
            s.dice.mean, s.precision.mean, s.recall.mean
        );
    }

    print!("{table}");
    if let Some(out) = &cfg.out {
        std::fs::write(out, &record)?;
        println!("wrote metric records to {}", out.display());
    }
    Ok(())
}

//! End-to-end tests of the `triseg` binary: exit codes, determinism, and the
//! documented file outputs.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use triseg_core::io::read_raw;
use triseg_core::model::{build_classifier, build_segmenter, ArchSpec, ModelKind};
use triseg_core::train::load_checkpoint;
use triseg_core::volume::Volume;

fn triseg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triseg"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn synth(dir: &Path, out: &str, count: usize, seed: u64) {
    let run = triseg(
        &[
            "synth",
            "--out",
            out,
            "--count",
            &count.to_string(),
            "--dims",
            "12,12,12",
            "--seed",
            &seed.to_string(),
            "--lesions",
            "1..2",
            "--radius",
            "2..3.5",
        ],
        dir,
    );
    assert_ok(&run);
}

/// Train all six models quickly; `epochs = 0` keeps the seeded init.
fn train_all(dir: &Path, models: &str, epochs: usize) {
    for plane in ["axial", "sagittal", "coronal"] {
        for task in ["classify", "segment"] {
            let run = triseg(
                &[
                    "train",
                    "--manifest",
                    "data/manifest.tsv",
                    "--plane",
                    plane,
                    "--task",
                    task,
                    "--out-dir",
                    models,
                    "--stage-channels",
                    "2",
                    "--epochs",
                    &epochs.to_string(),
                    "--patience",
                    "2",
                    "--seed",
                    "5",
                ],
                dir,
            );
            assert_ok(&run);
        }
    }
}

#[test]
fn synth_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "a", 4, 9);
    synth(dir.path(), "b", 4, 9);
    for name in ["case0000.vol", "case0003.vol", "manifest.tsv"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn synth_zero_cases_writes_an_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let run = triseg(&["synth", "--out", "empty", "--count", "0"], dir.path());
    assert_ok(&run);
    let manifest = std::fs::read_to_string(dir.path().join("empty/manifest.tsv")).unwrap();
    assert!(manifest.is_empty());
}

#[test]
fn bad_dims_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let run = triseg(&["synth", "--out", "x", "--count", "1", "--dims", "12,12"], dir.path());
    assert_eq!(run.status.code(), Some(2), "usage errors exit with 2");
}

#[test]
fn train_zero_epochs_keeps_the_seeded_initialization() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "data", 6, 1);
    let run = triseg(
        &[
            "train",
            "--manifest",
            "data/manifest.tsv",
            "--plane",
            "axial",
            "--task",
            "classify",
            "--out-dir",
            "models",
            "--stage-channels",
            "2",
            "--epochs",
            "0",
            "--seed",
            "5",
        ],
        dir.path(),
    );
    assert_ok(&run);
    let spec = ArchSpec::from_toml_str(
        &std::fs::read_to_string(dir.path().join("models/axial-classify.arch.toml")).unwrap(),
    )
    .unwrap();
    assert_eq!(spec.kind, ModelKind::Classifier);
    let trained =
        load_checkpoint::<f32>(&spec, &dir.path().join("models/axial-classify.ckpt")).unwrap();
    let fresh = build_classifier::<f32>(&spec, 5).unwrap();
    assert_eq!(trained.params_flat(), fresh.params_flat());
    let _ = build_segmenter::<f32>; // the segment path is exercised below
}

#[test]
fn train_logs_the_learning_rate_defaults() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "data", 6, 2);
    train_all(dir.path(), "models", 0);
    let cls_log =
        std::fs::read_to_string(dir.path().join("models/axial-classify.log")).unwrap();
    assert!(cls_log.contains("lr=0.00001"), "classification default lr missing: {cls_log}");
    let seg_log = std::fs::read_to_string(dir.path().join("models/axial-segment.log")).unwrap();
    assert!(seg_log.contains("lr=0.001"), "segmentation default lr missing: {seg_log}");
}

#[test]
fn predict_is_deterministic_and_vote_monotone() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "data", 6, 3);
    train_all(dir.path(), "models", 1);

    let volume = "data/case0000.vol";
    for out in ["p1/mask.vol", "p2/mask.vol"] {
        let run = triseg(
            &[
                "predict", "--volume", volume, "--models", "models", "--out", out, "--report",
                &format!("{out}.report.txt"), "--threads", "1",
            ],
            dir.path(),
        );
        assert_ok(&run);
    }
    let m1 = std::fs::read(dir.path().join("p1/mask.vol")).unwrap();
    let m2 = std::fs::read(dir.path().join("p2/mask.vol")).unwrap();
    assert_eq!(m1, m2, "identical runs must write identical masks");

    let run = triseg(
        &[
            "predict", "--volume", volume, "--models", "models", "--out", "p3/mask.vol",
            "--vote-threshold", "1",
        ],
        dir.path(),
    );
    assert_ok(&run);
    let strict = read_raw::<f32>(&dir.path().join("p1/mask.vol")).unwrap();
    let loose = read_raw::<f32>(&dir.path().join("p3/mask.vol")).unwrap();
    let strict_mask = strict.mask().unwrap();
    let loose_mask = loose.mask().unwrap();
    for (s, l) in strict_mask.data().iter().zip(loose_mask.data()) {
        assert!(s <= l, "vote threshold 3 must be a subset of threshold 1");
    }
    assert!(loose_mask.count_positives() >= strict_mask.count_positives());
}

#[test]
fn predict_lists_missing_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "data", 6, 4);
    train_all(dir.path(), "models", 0);
    std::fs::remove_file(dir.path().join("models/sagittal-segment.ckpt")).unwrap();
    let run = triseg(
        &["predict", "--volume", "data/case0000.vol", "--models", "models", "--out", "m.vol"],
        dir.path(),
    );
    assert_eq!(run.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&run.stderr);
    assert!(stderr.contains("sagittal-segment.ckpt"), "stderr: {stderr}");
}

#[test]
fn eval_perfect_prediction_scores_dice_one() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "data", 4, 6);

    // Self-comparison: the case's own mask as both prediction and truth.
    let case: PathBuf = dir.path().join("data/case0000.vol");
    let run = triseg(
        &[
            "eval",
            "--pred",
            case.to_str().unwrap(),
            "--truth",
            case.to_str().unwrap(),
            "--out",
            "metrics.tsv",
        ],
        dir.path(),
    );
    assert_ok(&run);
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("1.0000 \u{00b1} 0.0000"), "stdout: {stdout}");
    let record = std::fs::read_to_string(dir.path().join("metrics.tsv")).unwrap();
    assert!(record.contains("1.000000"));

    // The recorded values match the metrics module exactly.
    let vol: Volume<f32> = read_raw(&case).unwrap();
    let mask = vol.mask().unwrap();
    let m = triseg_core::metrics::evaluate_volume("case0000", mask, mask).unwrap();
    assert_eq!(m.dice, 1.0);
}

#[test]
fn eval_reports_both_sections_when_per_plane_masks_are_given() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "data", 4, 7);
    let case = "data/case0001.vol";
    let run = triseg(
        &[
            "eval",
            "--pred",
            case,
            "--truth",
            case,
            "--pred-axial",
            case,
            "--pred-sagittal",
            case,
            "--pred-coronal",
            case,
        ],
        dir.path(),
    );
    assert_ok(&run);
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("with-aggregation"));
    assert!(stdout.contains("without-aggregation (axial)"));
    assert!(stdout.contains("without-aggregation (coronal)"));
}

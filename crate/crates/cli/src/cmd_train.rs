//! `triseg train`: fit one (plane, task) model and write a checkpoint, its
//! arch file, and a training log.

use std::fmt::Write as _;
use std::path::PathBuf;

use triseg_core::error::{Error, Result};
use triseg_core::io::{
    balance_for_classification, extract_slices, lesion_only, read_manifest, Split,
};
use triseg_core::model::{build_classifier, build_segmenter, ArchSpec, ModelKind};
use triseg_core::scalar::{sc, Scalar};
use triseg_core::train::{fit, save_checkpoint, FitConfig};
use triseg_core::volume::Plane;

use crate::args::TaskArg;
use crate::data::{load_split, PlaneStacks};

pub struct TrainConfig {
    pub manifest: PathBuf,
    pub plane: Plane,
    pub task: TaskArg,
    pub out_dir: PathBuf,
    pub arch: Option<PathBuf>,
    pub stage_channels: Vec<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    pub balance_seed: u64,
}

/// Learning rates applied when `--lr` is not given: 0.00001 for
/// classification, 0.001 for segmentation.
pub fn default_learning_rate(task: TaskArg) -> f64 {
    match task {
        TaskArg::Classify => 1e-5,
        TaskArg::Segment => 1e-3,
    }
}

pub fn run<T: Scalar>(cfg: &TrainConfig) -> Result<()> {
    let root = cfg.manifest.parent().unwrap_or(std::path::Path::new(".")).to_path_buf();
    let records = read_manifest(&cfg.manifest)?;
    let train_cases = load_split::<T>(&records, &root, Split::Train2d)?;
    let val_cases = load_split::<T>(&records, &root, Split::Test2d)?;
    if train_cases.is_empty() || val_cases.is_empty() {
        return Err(Error::Data(format!(
            "training needs train2d and test2d cases, manifest has {} / {}",
            train_cases.len(),
            val_cases.len()
        )));
    }

    let slice_hw = cfg.plane.slice_hw(train_cases[0].1.dims());
    let spec = match &cfg.arch {
        Some(path) => {
            let spec = ArchSpec::from_toml_str(&std::fs::read_to_string(path)?)?;
            if spec.input_hw.0 < slice_hw.0 || spec.input_hw.1 < slice_hw.1 {
                return Err(Error::Config(format!(
                    "arch input {:?} is smaller than the {} slice dims {:?}",
                    spec.input_hw,
                    cfg.plane.name(),
                    slice_hw
                )));
            }
            let want = match cfg.task {
                TaskArg::Classify => ModelKind::Classifier,
                TaskArg::Segment => ModelKind::Segmenter,
            };
            if spec.kind != want {
                return Err(Error::Config(format!(
                    "arch file {} describes a {:?} model, task is {}",
                    path.display(),
                    spec.kind,
                    cfg.task.name()
                )));
            }
            spec
        }
        None => match cfg.task {
            TaskArg::Classify => ArchSpec::classifier(slice_hw, cfg.stage_channels.clone())?,
            TaskArg::Segment => ArchSpec::segmenter(slice_hw, cfg.stage_channels.clone())?,
        },
    };

    let train_ds = extract_slices(train_cases.iter().map(|(id, v)| (id.as_str(), v)), cfg.plane);
    let val_ds = extract_slices(val_cases.iter().map(|(id, v)| (id.as_str(), v)), cfg.plane);
    let (train_ds, val_ds, segmentation) = match cfg.task {
        TaskArg::Classify => (
            balance_for_classification(&train_ds, cfg.balance_seed)?,
            balance_for_classification(&val_ds, cfg.balance_seed.wrapping_add(1))?,
            false,
        ),
        TaskArg::Segment => (lesion_only(&train_ds), lesion_only(&val_ds), true),
    };
    if train_ds.entries.is_empty() || val_ds.entries.is_empty() {
        return Err(Error::Data(format!(
            "{} {} has no usable slices (train {} / val {})",
            cfg.plane.name(),
            cfg.task.name(),
            train_ds.entries.len(),
            val_ds.entries.len()
        )));
    }

    let train_stacks = PlaneStacks::build(&train_cases, cfg.plane);
    let val_stacks = PlaneStacks::build(&val_cases, cfg.plane);
    let train_samples = train_stacks.samples(&train_ds, spec.input_hw, segmentation)?;
    let val_samples = val_stacks.samples(&val_ds, spec.input_hw, segmentation)?;

    let mut model = match cfg.task {
        TaskArg::Classify => build_classifier::<T>(&spec, cfg.seed)?,
        TaskArg::Segment => build_segmenter::<T>(&spec, cfg.seed)?,
    };

    let lr = cfg.learning_rate.unwrap_or_else(|| default_learning_rate(cfg.task));
    let mut fit_cfg = FitConfig::new(sc::<T>(lr));
    fit_cfg.batch_size = cfg.batch_size;
    fit_cfg.max_epochs = cfg.epochs;
    fit_cfg.patience = cfg.patience;
    fit_cfg.min_delta = sc::<T>(cfg.min_delta);
    fit_cfg.shuffle_seed = cfg.seed;
    let report = fit(&mut model, &train_samples, &val_samples, &fit_cfg)?;

    std::fs::create_dir_all(&cfg.out_dir)?;
    let base = format!("{}-{}", cfg.plane.name(), cfg.task.name());
    let ckpt = cfg.out_dir.join(format!("{base}.ckpt"));
    save_checkpoint(&model, &ckpt)?;
    std::fs::write(cfg.out_dir.join(format!("{base}.arch.toml")), spec.to_toml_string()?)?;

    let mut log = String::new();
    let _ = writeln!(
        log,
        "# plane={} task={} lr={lr} batch_size={} epochs={} patience={} min_delta={} seed={} precision={} params={} train_slices={} val_slices={}",
        cfg.plane.name(),
        cfg.task.name(),
        cfg.batch_size,
        cfg.epochs,
        cfg.patience,
        cfg.min_delta,
        cfg.seed,
        T::DTYPE,
        model.count_params(),
        train_samples.len(),
        val_samples.len(),
    );
    let _ = writeln!(log, "epoch\ttrain_loss\tval_loss");
    for e in &report.epochs {
        let _ = writeln!(log, "{}\t{:.6}\t{:.6}", e.epoch, e.train_loss, e.val_loss);
    }
    let _ = writeln!(
        log,
        "# stopped_early={} best_epoch={} best_val_loss={:.6}",
        report.stopped_early, report.best_epoch, report.best_val_loss
    );
    std::fs::write(cfg.out_dir.join(format!("{base}.log")), &log)?;

    println!(
        "trained {base}: {} params, {} epochs (best {} at val loss {:.6}), checkpoint {}",
        model.count_params(),
        report.epochs.len(),
        report.best_epoch,
        report.best_val_loss,
        ckpt.display()
    );
    Ok(())
}

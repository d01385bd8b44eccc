//! The sequential classify-then-segment pipeline over all three planes.
//!
//! Per plane, every slice first passes the classifier gate; only gate-open
//! slices reach the segmenter, everything else emits an all-zero map. The
//! binarized per-plane maps are reassembled to voxel space and fused by the
//! vote rule. Slices are zero-padded up to each model's `input_hw` and
//! predictions cropped back, so padding never reaches the aggregation.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::aggregate::{aggregate_planes, binarize, AggregationRule, PlanePrediction};
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelParams};
use crate::scalar::{sc, Scalar};
use crate::tensor::Slice2;
use crate::volume::{normalize_volume, reassemble_mask, slice_volume, Mask3, Plane, Volume};

/// The trained classifier + segmenter pair for one plane.
#[derive(Debug, Clone)]
pub struct PlaneModelPair<T> {
    plane: Plane,
    classifier: ModelParams<T>,
    segmenter: ModelParams<T>,
}

impl<T: Scalar> PlaneModelPair<T> {
    pub fn new(plane: Plane, classifier: ModelParams<T>, segmenter: ModelParams<T>) -> Result<Self> {
        if classifier.spec().kind != ModelKind::Classifier {
            return Err(Error::Config(format!("{} pair: first model is not a classifier", plane.name())));
        }
        if segmenter.spec().kind != ModelKind::Segmenter {
            return Err(Error::Config(format!("{} pair: second model is not a segmenter", plane.name())));
        }
        Ok(Self { plane, classifier, segmenter })
    }

    pub fn plane(&self) -> Plane {
        self.plane
    }

    pub fn classifier(&self) -> &ModelParams<T> {
        &self.classifier
    }

    pub fn segmenter(&self) -> &ModelParams<T> {
        &self.segmenter
    }
}

/// Thresholds and execution knobs.
#[derive(Debug, Clone)]
pub struct PipelineConfig<T> {
    /// Classifier probability at or above which the segmenter runs.
    pub gate_threshold: T,
    /// Per-pixel binarization threshold applied to segmenter outputs.
    pub binarize_threshold: T,
    /// Vote rule for the final fusion.
    pub rule: AggregationRule,
    /// Minimum positive pixels for a segmentation to count as a lesion in the
    /// combined-classifier reading.
    pub min_lesion_pixels: usize,
    /// Worker threads for slice processing; 0 uses the ambient pool. Results
    /// are identical for any thread count.
    pub threads: usize,
}

impl<T: Scalar> Default for PipelineConfig<T> {
    fn default() -> Self {
        Self {
            gate_threshold: sc(0.5),
            binarize_threshold: sc(0.5),
            rule: AggregationRule::unanimous(),
            min_lesion_pixels: 1,
            threads: 0,
        }
    }
}

/// Outcome of one slice through the gate and (maybe) the segmenter.
#[derive(Debug, Clone)]
pub struct SliceOutcome<T> {
    pub cls_prob: T,
    pub seg_map: Slice2<T>,
    /// False iff the gate stayed closed and the map is all zeros by fiat.
    pub segmenter_ran: bool,
}

/// Classify one slice and, if the gate opens, segment it. Gate-closed slices
/// return an exactly-zero map without invoking the segmenter.
pub fn process_slice<T: Scalar>(
    pair: &PlaneModelPair<T>,
    slice: &Slice2<T>,
    cfg: &PipelineConfig<T>,
) -> Result<SliceOutcome<T>> {
    let cls_in_hw = pair.classifier.spec().input_hw;
    let padded = slice.to_tensor().zero_pad_hw(cls_in_hw.0, cls_in_hw.1)?;
    let cls_prob = pair.classifier.forward(&padded)?.data()[0];

    if cls_prob >= cfg.gate_threshold {
        let seg_in_hw = pair.segmenter.spec().input_hw;
        let seg_in = slice.to_tensor().zero_pad_hw(seg_in_hw.0, seg_in_hw.1)?;
        let seg_out = pair.segmenter.forward(&seg_in)?;
        let cropped = seg_out.crop_hw(slice.height(), slice.width())?;
        Ok(SliceOutcome { cls_prob, seg_map: Slice2::from_tensor(&cropped)?, segmenter_ran: true })
    } else {
        Ok(SliceOutcome {
            cls_prob,
            seg_map: Slice2::filled(slice.height(), slice.width(), T::zero()),
            segmenter_ran: false,
        })
    }
}

/// Combined-classifier label for one slice: lesion iff the gate opens AND the
/// binarized segmentation has at least `min_lesion_pixels` positives. A
/// gate-closed slice stays negative regardless of the segmenter.
pub fn act_as_classification<T: Scalar>(
    pair: &PlaneModelPair<T>,
    slice: &Slice2<T>,
    cfg: &PipelineConfig<T>,
) -> Result<bool> {
    let outcome = process_slice(pair, slice, cfg)?;
    Ok(combined_label(&outcome, cfg))
}

/// The combined-label rule applied to an existing outcome.
pub fn combined_label<T: Scalar>(outcome: &SliceOutcome<T>, cfg: &PipelineConfig<T>) -> bool {
    if outcome.cls_prob < cfg.gate_threshold {
        return false;
    }
    let positives = outcome
        .seg_map
        .data()
        .iter()
        .filter(|&&p| p >= cfg.binarize_threshold)
        .count();
    positives >= cfg.min_lesion_pixels
}

/// Everything one plane produced.
#[derive(Debug, Clone)]
pub struct PlaneRun<T> {
    pub plane: Plane,
    pub cls_probs: Vec<T>,
    pub gates: Vec<bool>,
    pub prob_maps: Vec<Slice2<T>>,
    pub combined_labels: Vec<bool>,
    pub segmenter_calls: usize,
    /// No-aggregation baseline mask for this plane.
    pub mask: Mask3,
    pub elapsed: Duration,
}

/// The pipeline's full output for one volume.
#[derive(Debug, Clone)]
pub struct PipelineResult<T> {
    pub planes: Vec<PlaneRun<T>>,
    pub aggregated: Mask3,
    pub elapsed: Duration,
}

impl<T> PipelineResult<T> {
    pub fn plane(&self, plane: Plane) -> &PlaneRun<T> {
        self.planes
            .iter()
            .find(|p| p.plane == plane)
            .expect("pipeline results always carry all three planes")
    }
}

/// Run the six models over a volume: min-max normalize, slice each plane,
/// gate + segment every slice, binarize, and fuse by the vote rule.
pub fn process_volume<T: Scalar>(
    pairs: &[PlaneModelPair<T>; 3],
    volume: &Volume<T>,
    cfg: &PipelineConfig<T>,
) -> Result<PipelineResult<T>> {
    {
        let mut planes: Vec<Plane> = pairs.iter().map(|p| p.plane).collect();
        planes.sort_by_key(|p| p.index_axis());
        planes.dedup();
        if planes.len() != 3 {
            return Err(Error::Config("process_volume needs one pair per plane".to_string()));
        }
    }
    let started = Instant::now();
    let normalized = normalize_volume(volume)?;
    let dims = normalized.dims();

    let run_planes = || -> Result<Vec<PlaneRun<T>>> {
        pairs
            .iter()
            .map(|pair| {
                let plane_started = Instant::now();
                let stack = slice_volume(&normalized, pair.plane);
                let slices: Vec<Slice2<T>> = (0..stack.len()).map(|i| stack.slice2(i)).collect();
                let outcomes: Vec<SliceOutcome<T>> = slices
                    .par_iter()
                    .map(|s| process_slice(pair, s, cfg))
                    .collect::<Result<_>>()?;

                let prediction = PlanePrediction::new(
                    pair.plane,
                    outcomes.iter().map(|o| o.seg_map.clone()).collect(),
                    cfg.binarize_threshold,
                )?;
                let binary = binarize(&prediction)?;
                let mask = reassemble_mask(&binary, dims)?;
                Ok(PlaneRun {
                    plane: pair.plane,
                    cls_probs: outcomes.iter().map(|o| o.cls_prob).collect(),
                    gates: outcomes.iter().map(|o| o.segmenter_ran).collect(),
                    combined_labels: outcomes.iter().map(|o| combined_label(o, cfg)).collect(),
                    segmenter_calls: outcomes.iter().filter(|o| o.segmenter_ran).count(),
                    prob_maps: outcomes.into_iter().map(|o| o.seg_map).collect(),
                    mask,
                    elapsed: plane_started.elapsed(),
                })
            })
            .collect()
    };

    let planes = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run_planes)?
    } else {
        run_planes()?
    };

    let stacks: Vec<_> = planes
        .iter()
        .map(|run| {
            let prediction = PlanePrediction::new(
                run.plane,
                run.prob_maps.clone(),
                cfg.binarize_threshold,
            )?;
            binarize(&prediction)
        })
        .collect::<Result<_>>()?;
    let by_plane = |plane: Plane| {
        stacks
            .iter()
            .find(|s| s.plane() == plane)
            .expect("one stack per plane")
    };
    let aggregated = aggregate_planes(
        by_plane(Plane::Axial),
        by_plane(Plane::Sagittal),
        by_plane(Plane::Coronal),
        dims,
        cfg.rule,
    )?;

    Ok(PipelineResult { planes, aggregated, elapsed: started.elapsed() })
}

/// Human-readable run report: slice counts, gate statistics, and timings per
/// plane.
pub fn run_report<T: Scalar>(result: &PipelineResult<T>) -> String {
    let mut out = String::new();
    out.push_str("pipeline run report\n");
    for run in &result.planes {
        let open = run.gates.iter().filter(|&&g| g).count();
        out.push_str(&format!(
            "plane {}: slices {}, gate open {}, segmenter calls {}, combined positive {}, positives {}, {:.1} ms\n",
            run.plane.name(),
            run.gates.len(),
            open,
            run.segmenter_calls,
            run.combined_labels.iter().filter(|&&l| l).count(),
            run.mask.count_positives(),
            run.elapsed.as_secs_f64() * 1e3,
        ));
    }
    out.push_str(&format!(
        "aggregated positives {}, total {:.1} ms\n",
        result.aggregated.count_positives(),
        result.elapsed.as_secs_f64() * 1e3,
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_classifier, build_segmenter, ArchSpec};

    /// Classifier whose head bias saturates the sigmoid to exactly 0 or 1.
    fn forced_classifier(hw: (usize, usize), open: bool) -> ModelParams<f64> {
        let spec = ArchSpec::classifier(hw, vec![2]).unwrap();
        let mut model = build_classifier::<f64>(&spec, 0).unwrap();
        let mut params = vec![0.0; model.count_params()];
        let n = params.len();
        params[n - 1] = if open { 1000.0 } else { -1000.0 };
        model.set_params_flat(&params).unwrap();
        model
    }

    fn plain_segmenter(hw: (usize, usize), seed: u64) -> ModelParams<f64> {
        build_segmenter::<f64>(&ArchSpec::segmenter(hw, vec![2, 4]).unwrap(), seed).unwrap()
    }

    fn a_slice(h: usize, w: usize) -> Slice2<f64> {
        Slice2::new(h, w, (0..h * w).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap()
    }

    #[test]
    fn closed_gate_emits_exact_zeros_without_running_the_segmenter() {
        let pair = PlaneModelPair::new(
            Plane::Axial,
            forced_classifier((8, 8), false),
            plain_segmenter((8, 8), 1),
        )
        .unwrap();
        let out = process_slice(&pair, &a_slice(8, 8), &PipelineConfig::default()).unwrap();
        assert_eq!(out.cls_prob, 0.0);
        assert!(!out.segmenter_ran);
        assert!(out.seg_map.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn open_gate_returns_the_segmenter_output_exactly() {
        let seg = plain_segmenter((8, 8), 2);
        let pair =
            PlaneModelPair::new(Plane::Axial, forced_classifier((8, 8), true), seg.clone()).unwrap();
        let slice = a_slice(8, 8);
        let out = process_slice(&pair, &slice, &PipelineConfig::default()).unwrap();
        assert_eq!(out.cls_prob, 1.0);
        assert!(out.segmenter_ran);
        let direct = seg.forward(&slice.to_tensor()).unwrap();
        assert_eq!(out.seg_map.data(), direct.data());
    }

    #[test]
    fn gate_boundary_probability_counts_as_lesion() {
        // Zero weights push the classifier to exactly 0.5, which must open
        // the gate under the >= rule.
        let spec = ArchSpec::classifier((8, 8), vec![2]).unwrap();
        let mut cls = build_classifier::<f64>(&spec, 0).unwrap();
        let zeros = vec![0.0; cls.count_params()];
        cls.set_params_flat(&zeros).unwrap();
        let pair = PlaneModelPair::new(Plane::Axial, cls, plain_segmenter((8, 8), 3)).unwrap();
        let out = process_slice(&pair, &a_slice(8, 8), &PipelineConfig::default()).unwrap();
        assert_eq!(out.cls_prob, 0.5);
        assert!(out.segmenter_ran);
    }

    #[test]
    fn combined_label_truth_table() {
        let cfg = PipelineConfig::default();
        let seg_pos = plain_segmenter((8, 8), 4);
        let slice = a_slice(8, 8);

        // Gate closed: negative no matter what the segmenter would say.
        let closed = PlaneModelPair::new(Plane::Axial, forced_classifier((8, 8), false), seg_pos.clone())
            .unwrap();
        assert!(!act_as_classification(&closed, &slice, &cfg).unwrap());

        // Gate open + nonempty segmentation: positive.
        let open = PlaneModelPair::new(Plane::Axial, forced_classifier((8, 8), true), seg_pos).unwrap();
        assert!(act_as_classification(&open, &slice, &cfg).unwrap());

        // Gate open + all-zero segmentation (head bias forced far negative):
        // the segmentation rectifies the false positive.
        let mut seg_neg = plain_segmenter((8, 8), 4);
        let mut params = seg_neg.params_flat();
        let n = params.len();
        params[n - 1] = -1000.0;
        seg_neg.set_params_flat(&params).unwrap();
        let rectified =
            PlaneModelPair::new(Plane::Axial, forced_classifier((8, 8), true), seg_neg).unwrap();
        assert!(!act_as_classification(&rectified, &slice, &cfg).unwrap());
    }

    #[test]
    fn volume_with_closed_gates_aggregates_to_empty() {
        let v = Volume::<f64>::new((8, 8, 8), (0..512).map(|i| (i % 11) as f64).collect()).unwrap();
        let pairs = [
            PlaneModelPair::new(Plane::Axial, forced_classifier((8, 8), false), plain_segmenter((8, 8), 1)).unwrap(),
            PlaneModelPair::new(Plane::Sagittal, forced_classifier((8, 8), false), plain_segmenter((8, 8), 2)).unwrap(),
            PlaneModelPair::new(Plane::Coronal, forced_classifier((8, 8), false), plain_segmenter((8, 8), 3)).unwrap(),
        ];
        let result = process_volume(&pairs, &v, &PipelineConfig::default()).unwrap();
        assert_eq!(result.aggregated.count_positives(), 0);
        for run in &result.planes {
            assert_eq!(run.segmenter_calls, 0);
            assert_eq!(run.mask.count_positives(), 0);
        }
    }

    #[test]
    fn volume_processing_is_deterministic_and_thread_invariant() {
        let v = Volume::<f64>::new((8, 8, 8), (0..512).map(|i| ((i * 37) % 101) as f64).collect())
            .unwrap();
        let mk = |plane| {
            PlaneModelPair::new(plane, forced_classifier((8, 8), true), plain_segmenter((8, 8), 7))
                .unwrap()
        };
        let pairs = [mk(Plane::Axial), mk(Plane::Sagittal), mk(Plane::Coronal)];
        let mut cfg = PipelineConfig::default();
        let a = process_volume(&pairs, &v, &cfg).unwrap();
        cfg.threads = 1;
        let b = process_volume(&pairs, &v, &cfg).unwrap();
        cfg.threads = 4;
        let c = process_volume(&pairs, &v, &cfg).unwrap();
        assert_eq!(a.aggregated, b.aggregated);
        assert_eq!(b.aggregated, c.aggregated);
        for (x, y) in a.planes.iter().zip(&b.planes) {
            assert_eq!(x.mask, y.mask);
            assert_eq!(x.cls_probs, y.cls_probs);
        }
    }

    #[test]
    fn aggregated_positives_are_contained_in_every_plane() {
        let v = Volume::<f64>::new((8, 8, 8), (0..512).map(|i| ((i * 13) % 97) as f64).collect())
            .unwrap();
        let mk = |plane, seed| {
            PlaneModelPair::new(plane, forced_classifier((8, 8), true), plain_segmenter((8, 8), seed))
                .unwrap()
        };
        let pairs = [mk(Plane::Axial, 10), mk(Plane::Sagittal, 20), mk(Plane::Coronal, 30)];
        let result = process_volume(&pairs, &v, &PipelineConfig::default()).unwrap();
        for run in &result.planes {
            for (agg, plane) in result.aggregated.data().iter().zip(run.mask.data()) {
                assert!(agg <= plane, "aggregated mask exceeded the {} mask", run.plane.name());
            }
        }
    }
}

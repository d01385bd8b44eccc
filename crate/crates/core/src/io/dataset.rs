//! Slice datasets: extraction from volumes, the case-level split, class
//! balancing, and the line-oriented entries file.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::volume::{Plane, Volume};

/// One 2D slice reference with its label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceEntry {
    pub case_id: String,
    pub plane: Plane,
    pub slice_index: usize,
    pub has_lesion: bool,
}

/// All slices of one plane across a set of cases.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SliceDataset {
    pub plane: Plane,
    pub entries: Vec<SliceEntry>,
}

impl SliceDataset {
    pub fn lesion_count(&self) -> usize {
        self.entries.iter().filter(|e| e.has_lesion).count()
    }

    pub fn normal_count(&self) -> usize {
        self.entries.len() - self.lesion_count()
    }
}

/// One entry per slice of `plane` in every case; `has_lesion` is true iff the
/// case's mask has at least one positive voxel in that slice. Cases without a
/// mask contribute all-normal entries.
pub fn extract_slices<'a, T: Scalar + 'a>(
    cases: impl IntoIterator<Item = (&'a str, &'a Volume<T>)>,
    plane: Plane,
) -> SliceDataset {
    let mut entries = Vec::new();
    for (case_id, volume) in cases {
        let dims = volume.dims();
        let count = plane.slice_count(dims);
        let mut flags = vec![false; count];
        if let Some(mask) = volume.mask() {
            let (_, ny, nz) = dims;
            for (idx, &m) in mask.data().iter().enumerate() {
                if m != 0 {
                    let coord = match plane {
                        Plane::Axial => idx % nz,
                        Plane::Sagittal => idx / (ny * nz),
                        Plane::Coronal => (idx / nz) % ny,
                    };
                    flags[coord] = true;
                }
            }
        }
        entries.extend(flags.into_iter().enumerate().map(|(slice_index, has_lesion)| SliceEntry {
            case_id: case_id.to_string(),
            plane,
            slice_index,
            has_lesion,
        }));
    }
    SliceDataset { plane, entries }
}

/// Case-level split: shuffles the ids with the seed and holds out
/// `round(n * holdout_ratio)` cases. Returns `(remaining, holdout)`; no case
/// appears in both.
pub fn split_cases(
    case_ids: &[String],
    holdout_ratio: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if case_ids.is_empty() {
        return Err(Error::Data("cannot split an empty case pool".to_string()));
    }
    if !(holdout_ratio > 0.0 && holdout_ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0, 1), got {holdout_ratio}")));
    }
    let mut ids: Vec<String> = case_ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_holdout = (case_ids.len() as f64 * holdout_ratio).round() as usize;
    let holdout = ids.split_off(ids.len() - n_holdout);
    Ok((ids, holdout))
}

/// Slice-level split of a dataset; `round(n * train_ratio)` entries go to the
/// first returned set.
pub fn split_dataset(
    ds: &SliceDataset,
    train_ratio: f64,
    seed: u64,
) -> Result<(SliceDataset, SliceDataset)> {
    if ds.entries.is_empty() {
        return Err(Error::Data("cannot split an empty slice dataset".to_string()));
    }
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::Config(format!("split ratio must be in (0, 1), got {train_ratio}")));
    }
    let mut idx: Vec<usize> = (0..ds.entries.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_train = (ds.entries.len() as f64 * train_ratio).round() as usize;
    let train_set: std::collections::HashSet<usize> = idx[..n_train].iter().copied().collect();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, e) in ds.entries.iter().enumerate() {
        if train_set.contains(&i) {
            train.push(e.clone());
        } else {
            test.push(e.clone());
        }
    }
    Ok((
        SliceDataset { plane: ds.plane, entries: train },
        SliceDataset { plane: ds.plane, entries: test },
    ))
}

/// Undersample the majority class so lesion and normal counts match exactly;
/// membership is deterministic per seed.
pub fn balance_for_classification(ds: &SliceDataset, seed: u64) -> Result<SliceDataset> {
    let lesion = ds.lesion_count();
    let normal = ds.normal_count();
    if lesion == 0 || normal == 0 {
        return Err(Error::Data(format!(
            "balancing needs both classes, got {lesion} lesion / {normal} normal slices"
        )));
    }
    let keep = lesion.min(normal);
    let majority_is_lesion = lesion > normal;
    let majority: Vec<usize> = ds
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.has_lesion == majority_is_lesion)
        .map(|(i, _)| i)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = majority.clone();
    shuffled.shuffle(&mut rng);
    let kept: std::collections::HashSet<usize> = shuffled[..keep].iter().copied().collect();
    let entries = ds
        .entries
        .iter()
        .enumerate()
        .filter(|(i, e)| e.has_lesion != majority_is_lesion || kept.contains(i))
        .map(|(_, e)| e.clone())
        .collect();
    Ok(SliceDataset { plane: ds.plane, entries })
}

/// Keep only lesion slices (the segmentation training pool).
pub fn lesion_only(ds: &SliceDataset) -> SliceDataset {
    SliceDataset {
        plane: ds.plane,
        entries: ds.entries.iter().filter(|e| e.has_lesion).cloned().collect(),
    }
}

/// Write entries as tab-separated lines: `case_id  plane  slice_index  0|1`.
pub fn write_entries(ds: &SliceDataset, path: &Path) -> Result<()> {
    let mut text = String::new();
    for e in &ds.entries {
        text.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            e.case_id,
            e.plane.name(),
            e.slice_index,
            u8::from(e.has_lesion)
        ));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Read an entries file written by [`write_entries`].
pub fn read_entries(path: &Path) -> Result<SliceDataset> {
    let text = fs::read_to_string(path)?;
    let mut entries = Vec::new();
    let mut plane: Option<Plane> = None;
    for (ln, line) in text.lines().enumerate() {
        if line.is_empty() {
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
        let p: Plane = fields[1].parse()?;
        plane.get_or_insert(p);
        entries.push(SliceEntry {
            case_id: fields[0].to_string(),
            plane: p,
            slice_index: fields[2]
                .parse()
                .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), ln + 1)))?,
            has_lesion: fields[3] == "1",
        });
    }
    let plane = plane.ok_or_else(|| Error::Data(format!("{} has no entries", path.display())))?;
    Ok(SliceDataset { plane, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Mask3;

    fn volume_with_one_lesion_voxel() -> Volume<f32> {
        let mut mask = Mask3::zeros((3, 3, 3));
        mask.set(1, 2, 0, 1);
        Volume::zeros((3, 3, 3)).unwrap().with_mask(mask).unwrap()
    }

    #[test]
    fn one_lesion_voxel_marks_exactly_one_slice_per_plane() {
        let v = volume_with_one_lesion_voxel();
        for plane in crate::volume::ALL_PLANES {
            let ds = extract_slices([("c0", &v)], plane);
            assert_eq!(ds.entries.len(), 3);
            assert_eq!(ds.lesion_count(), 1, "{plane:?}");
            let lesion_index = ds.entries.iter().find(|e| e.has_lesion).unwrap().slice_index;
            let expect = match plane {
                Plane::Axial => 0,
                Plane::Sagittal => 1,
                Plane::Coronal => 2,
            };
            assert_eq!(lesion_index, expect);
        }
    }

    #[test]
    fn maskless_volumes_are_all_normal() {
        let v = Volume::<f32>::zeros((4, 4, 4)).unwrap();
        let ds = extract_slices([("a", &v), ("b", &v)], Plane::Axial);
        assert_eq!(ds.entries.len(), 8);
        assert_eq!(ds.lesion_count(), 0);
    }

    #[test]
    fn case_split_counts_and_disjointness() {
        let ids: Vec<String> = (0..655).map(|i| format!("case{i:03}")).collect();
        let (pool, holdout) = split_cases(&ids, 0.2, 1).unwrap();
        assert_eq!(holdout.len(), 131);
        assert_eq!(pool.len(), 524);

        let small: Vec<String> = (0..10).map(|i| format!("c{i}")).collect();
        let (pool, holdout) = split_cases(&small, 0.2, 9).unwrap();
        assert_eq!((pool.len(), holdout.len()), (8, 2));
        for h in &holdout {
            assert!(!pool.contains(h));
        }

        assert!(split_cases(&[], 0.2, 0).is_err());
        assert!(split_cases(&small, 1.0, 0).is_err());
    }

    #[test]
    fn balancing_equalizes_the_classes() {
        let mk = |i: usize, lesion: bool| SliceEntry {
            case_id: format!("c{i}"),
            plane: Plane::Axial,
            slice_index: i,
            has_lesion: lesion,
        };
        let entries: Vec<SliceEntry> =
            (0..100).map(|i| mk(i, false)).chain((100..130).map(|i| mk(i, true))).collect();
        let ds = SliceDataset { plane: Plane::Axial, entries };
        let balanced = balance_for_classification(&ds, 3).unwrap();
        assert_eq!(balanced.lesion_count(), 30);
        assert_eq!(balanced.normal_count(), 30);

        // Already balanced input keeps its counts.
        let again = balance_for_classification(&balanced, 4).unwrap();
        assert_eq!(again.entries.len(), 60);

        // Deterministic membership per seed.
        assert_eq!(balance_for_classification(&ds, 3).unwrap(), balanced);

        let empty_class = SliceDataset {
            plane: Plane::Axial,
            entries: (0..5).map(|i| mk(i, false)).collect(),
        };
        assert!(balance_for_classification(&empty_class, 0).is_err());
    }

    #[test]
    fn entries_file_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("entries.tsv");
        let v = volume_with_one_lesion_voxel();
        let ds = extract_slices([("case-a", &v)], Plane::Coronal);
        write_entries(&ds, &path).unwrap();
        assert_eq!(read_entries(&path).unwrap(), ds);
    }
}

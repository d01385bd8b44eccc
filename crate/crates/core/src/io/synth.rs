//! Seeded phantom volumes: a smooth low-frequency background plus ellipsoidal
//! bright lesions with exact membership masks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};
use crate::volume::{Mask3, Volume};

/// How many lesions to place and how large they may be.
#[derive(Debug, Clone, Copy)]
pub struct LesionSpec {
    /// Inclusive range of lesion counts per case.
    pub count: (usize, usize),
    /// Inclusive range each ellipsoid semi-axis is drawn from, in voxels.
    pub radius: (f64, f64),
    /// Intensity added inside a lesion, drawn per lesion.
    pub intensity_boost: (f64, f64),
}

impl LesionSpec {
    pub fn new(count: (usize, usize), radius: (f64, f64)) -> Self {
        Self { count, radius, intensity_boost: (0.35, 0.55) }
    }
}

/// Axis-aligned ellipsoid in voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub radii: [f64; 3],
}

impl Ellipsoid {
    /// Exact membership test used for both intensities and the mask.
    pub fn contains(&self, x: usize, y: usize, z: usize) -> bool {
        let dx = (x as f64 - self.center[0]) / self.radii[0];
        let dy = (y as f64 - self.center[1]) / self.radii[1];
        let dz = (z as f64 - self.center[2]) / self.radii[2];
        dx * dx + dy * dy + dz * dz <= 1.0
    }
}

/// A generated case: the volume (mask attached) plus the lesion geometry it
/// was built from.
#[derive(Debug, Clone)]
pub struct SynthCase<T> {
    pub volume: Volume<T>,
    pub lesions: Vec<Ellipsoid>,
}

const GRID_SPACING: usize = 4;

/// Generate one phantom, deterministic per seed.
pub fn synth_volume<T: Scalar>(
    seed: u64,
    dims: (usize, usize, usize),
    spec: &LesionSpec,
) -> Result<SynthCase<T>> {
    if dims.0 < 8 || dims.1 < 8 || dims.2 < 8 {
        return Err(Error::Config(format!("phantom dims must be >= 8 per axis, got {dims:?}")));
    }
    if spec.count.0 > spec.count.1 {
        return Err(Error::Config(format!("lesion count range {:?} is inverted", spec.count)));
    }
    if !(spec.radius.0 > 0.0 && spec.radius.0 <= spec.radius.1) {
        return Err(Error::Config(format!("lesion radius range {:?} is invalid", spec.radius)));
    }
    let min_dim = dims.0.min(dims.1).min(dims.2) as f64;
    if 2.0 * spec.radius.1 >= min_dim {
        return Err(Error::Config(format!(
            "lesion diameter up to {} does not fit the smallest volume axis {min_dim}",
            2.0 * spec.radius.1
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Low-frequency background: coarse grid of levels, trilinear interpolation.
    let gx = dims.0.div_ceil(GRID_SPACING) + 1;
    let gy = dims.1.div_ceil(GRID_SPACING) + 1;
    let gz = dims.2.div_ceil(GRID_SPACING) + 1;
    let grid: Vec<f64> = (0..gx * gy * gz).map(|_| rng.gen_range(0.20..0.45)).collect();
    let grid_at = |i: usize, j: usize, k: usize| grid[(i * gy + j) * gz + k];

    let mut data = vec![0f64; dims.0 * dims.1 * dims.2];
    for x in 0..dims.0 {
        let fx = x as f64 / GRID_SPACING as f64;
        let (i0, tx) = (fx.floor() as usize, fx.fract());
        for y in 0..dims.1 {
            let fy = y as f64 / GRID_SPACING as f64;
            let (j0, ty) = (fy.floor() as usize, fy.fract());
            for z in 0..dims.2 {
                let fz = z as f64 / GRID_SPACING as f64;
                let (k0, tz) = (fz.floor() as usize, fz.fract());
                let c00 = grid_at(i0, j0, k0) * (1.0 - tx) + grid_at(i0 + 1, j0, k0) * tx;
                let c10 = grid_at(i0, j0 + 1, k0) * (1.0 - tx) + grid_at(i0 + 1, j0 + 1, k0) * tx;
                let c01 = grid_at(i0, j0, k0 + 1) * (1.0 - tx) + grid_at(i0 + 1, j0, k0 + 1) * tx;
                let c11 =
                    grid_at(i0, j0 + 1, k0 + 1) * (1.0 - tx) + grid_at(i0 + 1, j0 + 1, k0 + 1) * tx;
                let c0 = c00 * (1.0 - ty) + c10 * ty;
                let c1 = c01 * (1.0 - ty) + c11 * ty;
                data[(x * dims.1 + y) * dims.2 + z] = c0 * (1.0 - tz) + c1 * tz;
            }
        }
    }

    let n_lesions = rng.gen_range(spec.count.0..=spec.count.1);
    let mut lesions = Vec::with_capacity(n_lesions);
    let mut mask = Mask3::zeros(dims);
    for _ in 0..n_lesions {
        let radii = [
            rng.gen_range(spec.radius.0..=spec.radius.1),
            rng.gen_range(spec.radius.0..=spec.radius.1),
            rng.gen_range(spec.radius.0..=spec.radius.1),
        ];
        let center = [
            rng.gen_range(radii[0]..=(dims.0 - 1) as f64 - radii[0]),
            rng.gen_range(radii[1]..=(dims.1 - 1) as f64 - radii[1]),
            rng.gen_range(radii[2]..=(dims.2 - 1) as f64 - radii[2]),
        ];
        let boost = rng.gen_range(spec.intensity_boost.0..=spec.intensity_boost.1);
        let lesion = Ellipsoid { center, radii };

        let x0 = (center[0] - radii[0]).floor().max(0.0) as usize;
        let x1 = ((center[0] + radii[0]).ceil() as usize).min(dims.0 - 1);
        let y0 = (center[1] - radii[1]).floor().max(0.0) as usize;
        let y1 = ((center[1] + radii[1]).ceil() as usize).min(dims.1 - 1);
        let z0 = (center[2] - radii[2]).floor().max(0.0) as usize;
        let z1 = ((center[2] + radii[2]).ceil() as usize).min(dims.2 - 1);
        for x in x0..=x1 {
            for y in y0..=y1 {
                for z in z0..=z1 {
                    if lesion.contains(x, y, z) {
                        let i = (x * dims.1 + y) * dims.2 + z;
                        data[i] += boost;
                        mask.data_mut()[i] = 1;
                    }
                }
            }
        }
        lesions.push(lesion);
    }

    let data: Vec<T> = data.into_iter().map(|v| sc(v.clamp(0.0, 1.0))).collect();
    let volume = Volume::new(dims, data)?.with_mask(mask)?;
    Ok(SynthCase { volume, lesions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_lesions_give_an_empty_mask() {
        let case =
            synth_volume::<f32>(5, (16, 16, 16), &LesionSpec::new((0, 0), (2.0, 3.0))).unwrap();
        assert!(case.lesions.is_empty());
        assert_eq!(case.volume.mask().unwrap().count_positives(), 0);
    }

    #[test]
    fn same_seed_reproduces_the_volume_bit_for_bit() {
        let spec = LesionSpec::new((1, 3), (2.0, 4.0));
        let a = synth_volume::<f32>(99, (16, 16, 16), &spec).unwrap();
        let b = synth_volume::<f32>(99, (16, 16, 16), &spec).unwrap();
        assert_eq!(a.volume, b.volume);
        assert_eq!(a.lesions, b.lesions);
        let c = synth_volume::<f32>(100, (16, 16, 16), &spec).unwrap();
        assert_ne!(a.volume, c.volume);
    }

    #[test]
    fn mask_matches_direct_ellipsoid_enumeration() {
        let case =
            synth_volume::<f64>(7, (16, 16, 16), &LesionSpec::new((1, 1), (2.0, 2.0))).unwrap();
        let mask = case.volume.mask().unwrap();
        // Independent re-count straight from the membership formula.
        let mut count = 0usize;
        for x in 0..16 {
            for y in 0..16 {
                for z in 0..16 {
                    let inside = case.lesions.iter().any(|l| {
                        let dx = (x as f64 - l.center[0]) / l.radii[0];
                        let dy = (y as f64 - l.center[1]) / l.radii[1];
                        let dz = (z as f64 - l.center[2]) / l.radii[2];
                        dx * dx + dy * dy + dz * dz <= 1.0
                    });
                    if inside {
                        count += 1;
                        assert_eq!(mask.at(x, y, z), 1);
                    } else {
                        assert_eq!(mask.at(x, y, z), 0);
                    }
                }
            }
        }
        assert_eq!(mask.count_positives(), count);
        assert!(count > 0);
    }

    #[test]
    fn oversized_lesions_are_rejected() {
        let err = synth_volume::<f32>(0, (8, 8, 8), &LesionSpec::new((1, 1), (2.0, 5.0)))
            .unwrap_err();
        assert!(err.to_string().contains("does not fit"), "{err}");
    }
}

//! Minimal NIfTI-1 reader: the 348-byte header with automatic endianness
//! detection, datatypes uint8 / int16 / float32, and scl_slope / scl_inter
//! scaling. Single-file images (`n+1`) read their body at `vox_offset`;
//! header/image pairs (`ni1`) read the sibling `.img` file.

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{sc, Scalar};
use crate::volume::Volume;

const HEADER_LEN: usize = 348;
const OFF_DIM: usize = 40;
const OFF_DATATYPE: usize = 70;
const OFF_BITPIX: usize = 72;
const OFF_VOX_OFFSET: usize = 108;
const OFF_SCL_SLOPE: usize = 112;
const OFF_SCL_INTER: usize = 116;
const OFF_MAGIC: usize = 344;

const DT_UINT8: i16 = 2;
const DT_INT16: i16 = 4;
const DT_FLOAT32: i16 = 16;

#[derive(Clone, Copy)]
struct Endian {
    big: bool,
}

impl Endian {
    fn i16(self, b: &[u8], off: usize) -> i16 {
        let raw: [u8; 2] = b[off..off + 2].try_into().unwrap();
        if self.big {
            i16::from_be_bytes(raw)
        } else {
            i16::from_le_bytes(raw)
        }
    }

    fn f32(self, b: &[u8], off: usize) -> f32 {
        let raw: [u8; 4] = b[off..off + 4].try_into().unwrap();
        if self.big {
            f32::from_be_bytes(raw)
        } else {
            f32::from_le_bytes(raw)
        }
    }
}

/// Parse a NIfTI-1 file into a [`Volume`]. Intensities have
/// `scl_slope / scl_inter` applied when the slope is set (nonzero).
pub fn read_nifti<T: Scalar>(path: &Path) -> Result<Volume<T>> {
    let bytes = std::fs::read(path)?;
    if bytes.len() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b {
        return Err(Error::Unsupported(format!(
            "{} is gzip-compressed; decompress it first",
            path.display()
        )));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "{} is {} bytes, shorter than the 348-byte NIfTI-1 header",
            path.display(),
            bytes.len()
        )));
    }

    // sizeof_hdr doubles as the endianness probe.
    let sizeof_le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let sizeof_be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
    let endian = if sizeof_le == HEADER_LEN as i32 {
        Endian { big: false }
    } else if sizeof_be == HEADER_LEN as i32 {
        Endian { big: true }
    } else {
        return Err(Error::Format(format!(
            "{}: sizeof_hdr at offset 0 is {sizeof_le} (LE) / {sizeof_be} (BE), expected 348",
            path.display()
        )));
    };

    let magic = &bytes[OFF_MAGIC..OFF_MAGIC + 4];
    let single_file = match magic {
        b"n+1\0" => true,
        b"ni1\0" => false,
        other => {
            return Err(Error::Format(format!(
                "{}: bad magic {:?} at offset {OFF_MAGIC}, expected \"n+1\" or \"ni1\"",
                path.display(),
                String::from_utf8_lossy(other)
            )))
        }
    };

    let ndim = endian.i16(&bytes, OFF_DIM);
    if !(1..=7).contains(&ndim) {
        return Err(Error::Format(format!("{}: dim[0] = {ndim} out of range", path.display())));
    }
    let mut dim = [1usize; 7];
    for (i, d) in dim.iter_mut().enumerate().take(ndim as usize) {
        let v = endian.i16(&bytes, OFF_DIM + 2 * (i + 1));
        if v < 1 {
            return Err(Error::Format(format!(
                "{}: dim[{}] = {v} must be >= 1",
                path.display(),
                i + 1
            )));
        }
        *d = v as usize;
    }
    if dim[3..].iter().any(|&d| d > 1) {
        return Err(Error::Unsupported(format!(
            "{}: only 3D images are handled, got dims {dim:?}",
            path.display()
        )));
    }
    let dims = (dim[0], dim[1], dim[2]);

    let datatype = endian.i16(&bytes, OFF_DATATYPE);
    let bitpix = endian.i16(&bytes, OFF_BITPIX);
    let elem = match datatype {
        DT_UINT8 => 1usize,
        DT_INT16 => 2,
        DT_FLOAT32 => 4,
        other => {
            return Err(Error::Unsupported(format!(
                "{}: datatype code {other} (this reader handles uint8=2, int16=4, float32=16)",
                path.display()
            )))
        }
    };
    if bitpix as usize != elem * 8 {
        return Err(Error::Format(format!(
            "{}: bitpix {bitpix} disagrees with datatype {datatype}",
            path.display()
        )));
    }

    let slope = endian.f32(&bytes, OFF_SCL_SLOPE);
    let inter = endian.f32(&bytes, OFF_SCL_INTER);
    let scale = slope != 0.0 && slope.is_finite();

    let nvox = dims.0 * dims.1 * dims.2;
    let body: Vec<u8>;
    let data_bytes: &[u8] = if single_file {
        let vox_offset = endian.f32(&bytes, OFF_VOX_OFFSET);
        if !vox_offset.is_finite() || vox_offset < HEADER_LEN as f32 {
            return Err(Error::Format(format!(
                "{}: vox_offset {vox_offset} is invalid for a single-file image",
                path.display()
            )));
        }
        let start = vox_offset as usize;
        if bytes.len() < start + nvox * elem {
            return Err(Error::Format(format!(
                "{}: truncated body, need {} bytes at offset {start}, file has {}",
                path.display(),
                nvox * elem,
                bytes.len()
            )));
        }
        &bytes[start..start + nvox * elem]
    } else {
        let img = path.with_extension("img");
        body = std::fs::read(&img).map_err(|e| {
            Error::Format(format!("{}: companion image {}: {e}", path.display(), img.display()))
        })?;
        if body.len() < nvox * elem {
            return Err(Error::Format(format!(
                "{}: truncated body, need {} bytes, companion has {}",
                img.display(),
                nvox * elem,
                body.len()
            )));
        }
        &body[..nvox * elem]
    };

    // NIfTI stores x fastest; our volumes are x-major (z fastest). Permute.
    let mut data = vec![T::zero(); nvox];
    let (nx, ny, nz) = dims;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let src = x + y * nx + z * nx * ny;
                let raw = match datatype {
                    DT_UINT8 => f64::from(data_bytes[src]),
                    DT_INT16 => {
                        let off = src * 2;
                        f64::from(endian.i16(data_bytes, off))
                    }
                    _ => {
                        let off = src * 4;
                        f64::from(endian.f32(data_bytes, off))
                    }
                };
                let v = if scale { raw * f64::from(slope) + f64::from(inter) } else { raw };
                data[(x * ny + y) * nz + z] = sc::<T>(v);
            }
        }
    }
    Volume::new(dims, data)
}

#[cfg(test)]
pub(crate) mod test_support {
    //! Header assembly for tests, written independently from the parser by
    //! following the NIfTI-1 field table.

    pub struct NiftiSpec {
        pub dims: (usize, usize, usize),
        pub datatype: i16,
        pub scl_slope: f32,
        pub scl_inter: f32,
        pub big_endian: bool,
    }

    pub fn build_nifti(spec: &NiftiSpec, body: &[u8]) -> Vec<u8> {
        let mut h = vec![0u8; 352];
        let put_i32 = |h: &mut [u8], off: usize, v: i32, big: bool| {
            h[off..off + 4].copy_from_slice(&if big { v.to_be_bytes() } else { v.to_le_bytes() });
        };
        let put_i16 = |h: &mut [u8], off: usize, v: i16, big: bool| {
            h[off..off + 2].copy_from_slice(&if big { v.to_be_bytes() } else { v.to_le_bytes() });
        };
        let put_f32 = |h: &mut [u8], off: usize, v: f32, big: bool| {
            h[off..off + 4].copy_from_slice(&if big { v.to_be_bytes() } else { v.to_le_bytes() });
        };
        let big = spec.big_endian;
        put_i32(&mut h, 0, 348, big);
        put_i16(&mut h, 40, 3, big);
        put_i16(&mut h, 42, spec.dims.0 as i16, big);
        put_i16(&mut h, 44, spec.dims.1 as i16, big);
        put_i16(&mut h, 46, spec.dims.2 as i16, big);
        put_i16(&mut h, 70, spec.datatype, big);
        let bitpix = match spec.datatype {
            2 => 8,
            4 => 16,
            _ => 32,
        };
        put_i16(&mut h, 72, bitpix, big);
        put_f32(&mut h, 108, 352.0, big);
        put_f32(&mut h, 112, spec.scl_slope, big);
        put_f32(&mut h, 116, spec.scl_inter, big);
        h[344..348].copy_from_slice(b"n+1\0");
        h.extend_from_slice(body);
        h
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::{build_nifti, NiftiSpec};
    use super::*;

    fn write_tmp(bytes: &[u8]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vol.nii");
        std::fs::write(&path, bytes).unwrap();
        (dir, path)
    }

    #[test]
    fn parses_a_float32_cube() {
        let body: Vec<u8> = (0..8).flat_map(|i| (i as f32).to_le_bytes()).collect();
        let spec = NiftiSpec {
            dims: (2, 2, 2),
            datatype: 16,
            scl_slope: 0.0,
            scl_inter: 0.0,
            big_endian: false,
        };
        let (_dir, path) = write_tmp(&build_nifti(&spec, &body));
        let v = read_nifti::<f64>(&path).unwrap();
        assert_eq!(v.dims(), (2, 2, 2));
        // NIfTI body index 1 is x=1, y=0, z=0.
        assert_eq!(v.at(1, 0, 0), 1.0);
        assert_eq!(v.at(0, 1, 0), 2.0);
        assert_eq!(v.at(0, 0, 1), 4.0);
    }

    #[test]
    fn applies_slope_and_intercept() {
        let body = vec![3u8];
        let spec = NiftiSpec {
            dims: (1, 1, 1),
            datatype: 2,
            scl_slope: 2.0,
            scl_inter: 1.0,
            big_endian: false,
        };
        let (_dir, path) = write_tmp(&build_nifti(&spec, &body));
        let v = read_nifti::<f32>(&path).unwrap();
        assert_eq!(v.at(0, 0, 0), 7.0);
    }

    #[test]
    fn detects_big_endian_via_sizeof_hdr() {
        let body: Vec<u8> = [100i16, -7].iter().flat_map(|v| v.to_be_bytes()).collect();
        let spec = NiftiSpec {
            dims: (2, 1, 1),
            datatype: 4,
            scl_slope: 0.0,
            scl_inter: 0.0,
            big_endian: true,
        };
        let (_dir, path) = write_tmp(&build_nifti(&spec, &body));
        let v = read_nifti::<f64>(&path).unwrap();
        assert_eq!(v.at(0, 0, 0), 100.0);
        assert_eq!(v.at(1, 0, 0), -7.0);
    }

    #[test]
    fn rejects_bad_magic_naming_the_offset() {
        let spec = NiftiSpec {
            dims: (1, 1, 1),
            datatype: 2,
            scl_slope: 0.0,
            scl_inter: 0.0,
            big_endian: false,
        };
        let mut bytes = build_nifti(&spec, &[0u8]);
        bytes[344..348].copy_from_slice(b"bad\0");
        let (_dir, path) = write_tmp(&bytes);
        let err = read_nifti::<f32>(&path).unwrap_err();
        assert!(err.to_string().contains("344"), "{err}");
    }

    #[test]
    fn rejects_unsupported_datatype_and_truncation_and_gzip() {
        let spec = NiftiSpec {
            dims: (2, 2, 2),
            datatype: 64, // float64, deliberately unsupported
            scl_slope: 0.0,
            scl_inter: 0.0,
            big_endian: false,
        };
        let (_dir, path) = write_tmp(&build_nifti(&spec, &[0u8; 64]));
        assert!(matches!(read_nifti::<f32>(&path), Err(Error::Unsupported(_))));

        let spec = NiftiSpec {
            dims: (2, 2, 2),
            datatype: 16,
            scl_slope: 0.0,
            scl_inter: 0.0,
            big_endian: false,
        };
        let (_dir2, path2) = write_tmp(&build_nifti(&spec, &[0u8; 4]));
        let err = read_nifti::<f32>(&path2).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{err}");

        let (_dir3, path3) = write_tmp(&[0x1f, 0x8b, 0x08, 0x00]);
        assert!(matches!(read_nifti::<f32>(&path3), Err(Error::Unsupported(_))));
    }
}

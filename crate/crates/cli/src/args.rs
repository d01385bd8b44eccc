//! Shared argument types and parsers.

use clap::ValueEnum;
use triseg_core::volume::Plane;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlaneArg {
    Axial,
    Sagittal,
    Coronal,
}

impl From<PlaneArg> for Plane {
    fn from(p: PlaneArg) -> Plane {
        match p {
            PlaneArg::Axial => Plane::Axial,
            PlaneArg::Sagittal => Plane::Sagittal,
            PlaneArg::Coronal => Plane::Coronal,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Classify,
    Segment,
}

impl TaskArg {
    pub fn name(self) -> &'static str {
        match self {
            TaskArg::Classify => "classify",
            TaskArg::Segment => "segment",
        }
    }
}

/// `"32,32,32"` -> volume dims.
pub fn parse_dims(s: &str) -> Result<(usize, usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected X,Y,Z, got {s:?}"));
    }
    let mut d = [0usize; 3];
    for (i, p) in parts.iter().enumerate() {
        d[i] = p.trim().parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok((d[0], d[1], d[2]))
}

/// `"0..2"` -> inclusive usize range.
pub fn parse_count_range(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected LO..HI, got {s:?}"))?;
    let lo = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
    if lo > hi {
        return Err(format!("range {s:?} is inverted"));
    }
    Ok((lo, hi))
}

/// `"2.5..5"` -> inclusive f64 range.
pub fn parse_float_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once("..").ok_or_else(|| format!("expected LO..HI, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
    if !(lo.is_finite() && hi.is_finite()) || lo > hi {
        return Err(format!("range {s:?} is invalid"));
    }
    Ok((lo, hi))
}

/// Default worker count: the TRISEG_THREADS variable, else 0 (ambient pool).
pub fn default_threads() -> usize {
    std::env::var("TRISEG_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(0)
}

//! Scalar abstraction over the two supported precisions.
//!
//! All numeric code in this crate is generic over [`Scalar`], implemented for
//! `f32` (training/inference) and `f64` (gradient verification). There is a
//! single precision switch per run; nothing is mixed.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Floating-point scalar for tensors, weights, and losses.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Name used in file headers ("f32" / "f64").
    const DTYPE: &'static str;

    /// Lossless-enough conversion from an `f64` literal or intermediate.
    fn from_f64_lossy(v: f64) -> Self {
        NumCast::from(v).expect("finite f64 converts to every supported scalar")
    }

    /// Widen to `f64` for reporting and file formats.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("every supported scalar widens to f64")
    }
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";
}

/// Shorthand used throughout: `sc::<T>(0.5)`.
pub fn sc<T: Scalar>(v: f64) -> T {
    T::from_f64_lossy(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_between_precisions() {
        assert_eq!(sc::<f32>(0.25), 0.25f32);
        assert_eq!(sc::<f64>(0.25), 0.25f64);
        assert_eq!(0.5f32.to_f64_lossy(), 0.5f64);
    }
}

//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::str::FromStr;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point type the solvers are generic over (`f32` or `f64`).
///
/// All tolerances quoted in the crate documentation assume `f64`; `f32`
/// instantiations compile and run but only reach single-precision accuracy.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + FromStr
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into `Self`.
    fn lit(x: f64) -> Self;

    /// Lossy conversion to `f64` for reporting.
    fn as_f64(self) -> f64;

    /// Machine epsilon as `f64`, used to derive default tolerances.
    const EPS: f64;
}

impl Scalar for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    const EPS: f64 = f32::EPSILON as f64;
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    const EPS: f64 = f64::EPSILON;
}

/// `x^p` for `x >= 0`, with `0^p = 0` for every `p > 0`.
#[inline]
pub(crate) fn pow_pos<T: Scalar>(x: T, p: T) -> T {
    if x <= T::zero() {
        T::zero()
    } else {
        x.powf(p)
    }
}

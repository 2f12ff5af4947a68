use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the numerical core is generic over (`f32` or `f64`).
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or tolerance.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Convert a count.
    #[inline]
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("count fits in scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Machine epsilon of `T`, detected from its storage width.
pub(crate) fn machine_eps<T: Scalar>() -> f64 {
    if std::mem::size_of::<T>() <= 4 {
        f32::EPSILON as f64
    } else {
        f64::EPSILON
    }
}

/// `tol` widened to a few ulps when `T` cannot represent it meaningfully.
pub(crate) fn tol<T: Scalar>(tol: f64) -> T {
    T::lit(tol.max(64.0 * machine_eps::<T>()))
}

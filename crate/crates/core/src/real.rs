//! Scalar abstraction shared by every field and operator in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating point type the spectral machinery can run on (`f32` or `f64`).
///
/// The conservation diagnostics are calibrated for `f64`; `f32` instantiations
/// compile and run but will not meet the 1e-10 level tolerances.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Sum + Display + Debug + Default
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("usize representable")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex numbers over a [`Real`] scalar.
pub type Cplx<T> = num_complex::Complex<T>;

#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Cplx<T> {
    Cplx::new(re, im)
}

/// The imaginary unit.
#[inline]
pub(crate) fn imag_unit<T: Real>() -> Cplx<T> {
    Cplx::new(T::zero(), T::one())
}

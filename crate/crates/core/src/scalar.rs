//! Scalar abstraction shared by every signal-processing layer.
//!
//! Design parameters (frequencies, bandwidths, seeds) are always `f64`; sample
//! arrays and spectral accumulators are generic over [`Real`] so the pipeline
//! can run in `f32` where memory matters and in `f64` where exactness does.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Floating-point sample type: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Default + Debug + Display + Send + Sync + 'static
{
    /// Tolerance for "numerically zero" imaginary residue after an inverse FFT.
    fn imag_tolerance() -> Self;
}

impl Real for f32 {
    fn imag_tolerance() -> Self {
        1e-4
    }
}

impl Real for f64 {
    fn imag_tolerance() -> Self {
        1e-8
    }
}

/// Converts an `f64` constant into `T`.
#[inline]
pub fn cst<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant representable in target float")
}

/// Widens a sample to `f64` for statistics.
#[inline]
pub fn wide<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Sum of squares accumulated in `f64`.
pub fn energy<T: Real>(x: &[T]) -> f64 {
    x.iter().map(|&v| wide(v) * wide(v)).sum()
}

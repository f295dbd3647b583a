//! Scalar abstraction: every numeric routine in this crate is generic over
//! [`Real`], implemented for `f32` and `f64`.

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

/// Floating-point scalar the core math runs on.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Default
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Convert an `f64` constant into the working scalar type.
#[inline]
pub fn cast<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 constant representable in scalar type")
}

/// Widen any scalar to `f64` (for reports and tolerances).
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar convertible to f64")
}

//! Scalar abstraction: everything numeric in this crate is generic over a
//! real floating-point type, with `f64` as the working default.

use std::iter::Sum;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the whole library is generic over.
///
/// `nalgebra::RealField` supplies the elementary functions; the extras here
/// are plumbing for literals, diagnostics and finiteness checks.
pub trait Real:
    RealField + FromPrimitive + ToPrimitive + Copy + Default + Sum + Send + Sync + 'static
{
    /// Lift an `f64` literal into `Self`.
    fn of(x: f64) -> Self;
    /// Lower into `f64` for reports and error payloads.
    fn to_f(self) -> f64;
    fn is_fin(self) -> bool;
}

impl Real for f64 {
    #[inline]
    fn of(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f(self) -> f64 {
        self
    }
    #[inline]
    fn is_fin(self) -> bool {
        self.is_finite()
    }
}

impl Real for f32 {
    #[inline]
    fn of(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f(self) -> f64 {
        self as f64
    }
    #[inline]
    fn is_fin(self) -> bool {
        self.is_finite()
    }
}

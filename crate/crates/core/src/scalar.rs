//! Floating-point scalar abstraction for the numeric core.
//!
//! All estimators and checks are generic over [`Scalar`] so they can run in
//! either `f32` or `f64`. The crate root exports `f64` aliases for the common
//! case; `f32` is mostly useful for memory-bound experiments on large trees.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Scalar type usable by the estimators: an IEEE float with the usual
/// transcendental functions, assignment operators, and thread-safety bounds
/// required by the parallel checks.
pub trait Scalar:
    Float
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts a count or constant, panicking only on values far outside the
    /// representable range (never the case for the sizes handled here).
    fn cast(x: f64) -> Self {
        Self::from(x).expect("constant representable in scalar type")
    }

    /// Converts a `usize` count losslessly enough for weighting purposes.
    fn cast_usize(x: usize) -> Self {
        Self::from(x).expect("count representable in scalar type")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Relative difference `|a - b| / max(1, |a|, |b|)`, the comparison used
/// throughout the test suites: relative for large values, absolute near zero.
pub fn relative_diff<T: Scalar>(a: T, b: T) -> T {
    let scale = T::one().max(a.abs()).max(b.abs());
    (a - b).abs() / scale
}

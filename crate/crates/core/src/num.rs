//! Scalar abstraction for the whole crate.
//!
//! Every numerical routine is generic over [`Real`], which is implemented for
//! `f32` and `f64`. Model constants are written as `f64` literals and pulled
//! into the working precision with [`Real::of`], so a single set of equations
//! serves both precisions. The crate root exports `f64` aliases for the common
//! double-precision case.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable throughout the crate.
///
/// A thin umbrella over the `num-traits` capabilities the solvers need, plus
/// the formatting bounds required to report values in errors and output files.
pub trait Real:
    Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    ///
    /// Panics if the value is not representable, which cannot happen for the
    /// finite model constants this crate feeds it.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite constant must convert")
    }

    /// Converts a `usize` count into this scalar type.
    ///
    /// Panics only if the count exceeds the scalar's exact integer range,
    /// which step counts in practice do not.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count must convert")
    }
}

impl Real for f32 {}
impl Real for f64 {}

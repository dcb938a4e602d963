//! Scalar abstraction for all value tables and rewards.
//!
//! Every table-based component (games, learners, solvers) is generic over a
//! floating scalar so the same code runs in `f32` or `f64`. The crate root
//! exports `f64`-concrete aliases, which is what the harness and CLI use.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

/// Floating scalar usable for rewards, values, and likelihoods.
pub trait Scalar:
    Float + FromPrimitive + AddAssign + SubAssign + MulAssign + Sum + Debug + Display + 'static
{
    /// Lossy conversion from `f64`, for literals and RNG draws.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("f64 conversion")
    }

    /// Lossy conversion to `f64`, for metric output.
    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

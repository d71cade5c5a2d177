//! Scalar abstraction for the probability arithmetic.
//!
//! Everything numeric in this crate is generic over [`Scalar`], so the same
//! code runs in `f64` (the default everywhere) or `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real number type used for probability masses and matrix entries.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant, panicking only for types that cannot hold it.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("scalar literal out of range")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {}
impl Scalar for f32 {}

/// Tolerance for classifying column sums as stochastic or sub-stochastic.
pub const EPS_CLASS: f64 = 1e-9;

/// Tolerance for validating that a distribution sums to one.
pub const EPS_NORM: f64 = 1e-9;

/// Masses at or below this value are treated as impossible events.
pub const ZERO_MASS: f64 = 1e-12;

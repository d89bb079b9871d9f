//! Scalar abstraction for the statistical routines.
//!
//! Counting is always exact (integers and rationals); only the final ratios,
//! correlations and likelihood fits are computed in a floating scalar `T`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point type usable by the analytics (`f32` or `f64`).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar")
    }

    fn from_wide(n: u128) -> Self {
        Self::from_u128(n).expect("count representable in scalar")
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar")
    }

    fn from_ratio(r: Ratio<u64>) -> Self {
        Self::from_count(*r.numer()) / Self::from_count(*r.denom())
    }
}

impl<T> Scalar for T where
    T: Float
        + FromPrimitive
        + ToPrimitive
        + Sum
        + Debug
        + Display
        + Default
        + Send
        + Sync
        + 'static
{
}

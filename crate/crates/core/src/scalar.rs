//! Scalar abstraction over the floating-point type used by the numeric core.
//!
//! All math modules are generic over [`Scalar`] so the same code runs at
//! `f32` or `f64`. The benchmark pipeline instantiates everything at `f64`
//! through the aliases at the crate root; the Riccati recursions and the
//! equilibrium fixed point are sensitive to precision.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant")
    }

    /// Widen to `f64` (exact for `f32`, identity for `f64`).
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_conversion_round_trips() {
        assert_eq!(f64::c(0.25), 0.25);
        assert_eq!(f32::c(0.25), 0.25f32);
        assert_eq!(0.5f32.to_f64_lossy(), 0.5);
    }
}

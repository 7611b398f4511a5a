//! Scalar abstractions shared by the numeric modules.
//!
//! [`Numeric`] covers everything that only needs field arithmetic and an
//! ordering (matrix differences, normalisation), so exact types such as
//! `num_rational::Ratio<i64>` work there. [`Real`] adds the transcendental
//! functions needed by entropy, great-circle distance and the network.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive};

pub trait Numeric: Num + Signed + Copy + PartialOrd + Debug + Send + Sync + 'static {
    /// Lift a non-negative count into the scalar type.
    fn from_count(n: u64) -> Self;
}

impl<T> Numeric for T
where
    T: Num + Signed + Copy + PartialOrd + Debug + Send + Sync + FromPrimitive + 'static,
{
    fn from_count(n: u64) -> Self {
        T::from_u64(n).expect("count not representable in scalar type")
    }
}

pub trait Real:
    Numeric
    + Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Display
{
    fn from_f64_lossy(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 not representable")
    }

    fn to_f64_lossy(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("scalar not representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    fn third<T: Numeric>() -> T {
        T::from_count(1) / T::from_count(3)
    }

    #[test]
    fn counts_lift_into_floats() {
        assert_eq!(<f64 as Numeric>::from_count(7), 7.0);
        assert!((third::<f32>() - 1.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn real_round_trips_through_f64() {
        let x = f32::from_f64_lossy(0.25);
        assert_eq!(x.to_f64_lossy(), 0.25);
    }
}

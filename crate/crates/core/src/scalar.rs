//! The floating-point scalar abstraction shared by every numeric routine.
//!
//! Structural lattice computations are exact (see [`crate::exact`]); everything
//! that sums Gaussian weights is generic over a [`Real`] so the same code runs in
//! `f32` and `f64`. Error bounds are expressed in terms of [`Real::unit_roundoff`]
//! so they scale with the chosen precision.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Half the machine epsilon.
    fn unit_roundoff() -> Self {
        Self::epsilon() * Self::from_f64(0.5).unwrap()
    }

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Widen `self` upward by a few ulps; used when a bound computed in this
    /// precision must stay an upper bound.
    fn round_up_bound(self) -> Self {
        let u = Self::unit_roundoff();
        self + self.abs() * Self::lit(4.0) * u + Self::min_positive_value()
    }
}

impl Real for f32 {}
impl Real for f64 {}

//! Scalar abstraction shared by the numerical core.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar the state-space code is generic over.
///
/// Implemented for `f32` and `f64`. Numerical tolerances are quoted for
/// double precision and widened to a precision floor for narrower types
/// through [`Real::tol`].
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// A double-precision tolerance, floored at 64 ulps of one for this type.
    #[inline]
    fn tol(spec: f64) -> Self {
        Self::lit(spec).max(Self::epsilon() * Self::lit(64.0))
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

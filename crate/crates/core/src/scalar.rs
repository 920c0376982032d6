//! Floating point abstraction shared by every numerical module.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the solvers are generic over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal, saturating to infinity when out of range.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(|| {
            if x > 0.0 {
                Self::infinity()
            } else {
                Self::neg_infinity()
            }
        })
    }

    /// Magnitude above which an iterate counts as overflowed.
    fn overflow_limit() -> Self {
        let lim = Self::lit(1e300);
        if lim.is_finite() {
            lim
        } else {
            Self::max_value() / Self::lit(1e4)
        }
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

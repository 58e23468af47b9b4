use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used throughout the crate.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only for values the type cannot
    /// represent at all (never happens for `f32`/`f64`).
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

//! Scalar abstraction over the floating-point type of the numerical core.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Floating-point scalar: `f32` or `f64`.
///
/// The whole pipeline is generic over `Real` so it can run in either
/// precision; `f64` is what the CLI and the crate-root aliases use.
pub trait Real:
    Float
    + FromPrimitive
    + NumAssignOps
    + Sum<Self>
    + Send
    + Sync
    + fmt::Debug
    + fmt::Display
    + 'static
{
    /// Convert an `f64` constant into this scalar type.
    fn cast(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 constant")
    }

    /// Widen to `f64` for reporting and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

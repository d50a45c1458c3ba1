//! Scalar abstraction: the whole engine is generic over the floating type.

use num_traits::{Float, FromPrimitive};

/// Floating scalar the engines operate on: `f64` for verification runs,
/// `f32` mostly to keep the math honest about what is exact and what is not.
pub trait Real:
    Float
    + FromPrimitive
    + core::fmt::Debug
    + core::fmt::Display
    + core::iter::Sum
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` constant into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Lift a small integer (dimension, multiplicity) into the scalar type.
    fn of_usize(k: usize) -> Self {
        Self::from_usize(k).expect("integer not representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float
        + FromPrimitive
        + core::fmt::Debug
        + core::fmt::Display
        + core::iter::Sum
        + Send
        + Sync
        + 'static
{
}

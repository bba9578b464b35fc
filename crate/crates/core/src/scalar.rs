//! Floating-point abstraction shared by every index.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Coordinate type of feature vectors: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion used for configuration values, which are always
    /// read as `f64`.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite configuration value")
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

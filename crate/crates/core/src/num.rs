//! Scalar abstraction shared by the numeric kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the numeric kernels are generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the type cannot hold it.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal out of range for scalar type")
    }

    fn from_usize_lossy(x: usize) -> Self {
        Self::from_usize(x).expect("integer out of range for scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Total order over scalars for use in heaps and sorts; NaN sorts last.
pub(crate) fn total_cmp<S: Scalar>(a: S, b: S) -> std::cmp::Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| match (a.is_nan(), b.is_nan()) {
        (true, false) => std::cmp::Ordering::Greater,
        (false, true) => std::cmp::Ordering::Less,
        _ => std::cmp::Ordering::Equal,
    })
}

use std::fmt::Debug;

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar usable by the quadrature and series code: `f32` or `f64`.
pub trait Scalar: Float + FloatConst + FromPrimitive + Debug + Send + Sync + 'static {
    /// Relative machine-level tolerance used for endpoint and degeneracy tests.
    fn tiny() -> Self;
}

impl Scalar for f32 {
    fn tiny() -> Self {
        1e-6
    }
}

impl Scalar for f64 {
    fn tiny() -> Self {
        1e-12
    }
}

#[inline]
pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[inline]
pub(crate) fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("index representable in scalar type")
}

//! Floating point abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used by the estimators: `f32` or `f64`.
///
/// Gaussian densities need `exp`/`ln`, so exact rational types are not
/// supported.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Infallible for `f32` and `f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar converts to f64")
    }

    /// Machine epsilon scaled for tolerance defaults.
    #[inline]
    fn eps() -> Self {
        Self::epsilon()
    }

    /// IEEE total order, used wherever sort order must be deterministic.
    fn total_cmp_scalar(&self, other: &Self) -> std::cmp::Ordering;
}

impl Scalar for f32 {
    #[inline]
    fn total_cmp_scalar(&self, other: &Self) -> std::cmp::Ordering {
        self.total_cmp(other)
    }
}

impl Scalar for f64 {
    #[inline]
    fn total_cmp_scalar(&self, other: &Self) -> std::cmp::Ordering {
        self.total_cmp(other)
    }
}

/// Numerically stable `ln Σ exp(terms)`. Returns `-inf` for an empty slice.
pub fn log_sum_exp<T: Scalar>(terms: &[T]) -> T {
    let max = terms.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let mut acc = T::zero();
    for &t in terms {
        acc += (t - max).exp();
    }
    max + acc.ln()
}

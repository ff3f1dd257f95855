//! Numeric abstraction for the model core.
//!
//! Factor evaluation, message passing and learning are written against
//! [`Scalar`] so they run in either `f32` or `f64`. Data ingestion and the
//! observation statistics stay in `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable by the inference and learning code: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// `log(exp(a) + exp(b))` without overflow; handles `-inf` operands.
    fn log_add_exp(self, other: Self) -> Self {
        let (hi, lo) = if self >= other { (self, other) } else { (other, self) };
        if hi == Self::neg_infinity() {
            return hi;
        }
        hi + (lo - hi).exp().ln_1p()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Log-sum-exp over a slice; `-inf` for an empty slice or all `-inf` entries.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let max = xs.iter().copied().fold(S::neg_infinity(), S::max);
    if max == S::neg_infinity() {
        return max;
    }
    let sum: S = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All of the mechanics is written once against [`Real`], which is
//! implemented for `f32`, `f64` and for [`Dual`](crate::dual::Dual) numbers
//! over any `Real`. Nesting duals is how the higher derivatives needed by the
//! optimal control equations are obtained exactly.

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_traits::{Float, NumAssignOps, NumOps, One, Zero};

/// Real-like scalar: a float or a (possibly nested) dual number over a float.
///
/// Comparisons and tolerance checks go through [`Real::to_f64`], which returns
/// the primal (value) part.
pub trait Real:
    Copy
    + Debug
    + Display
    + PartialEq
    + Zero
    + One
    + NumOps
    + NumAssignOps
    + Neg<Output = Self>
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;

    /// Primal value, discarding any derivative parts.
    fn to_f64(self) -> f64;

    /// Machine epsilon of the underlying float.
    fn epsilon() -> f64;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;
    fn atan2(self, other: Self) -> Self;

    /// `(sin, cos)` together; nested duals share the inner evaluations.
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }

    fn tan(self) -> Self {
        let (s, c) = self.sin_cos();
        s / c
    }

    fn recip(self) -> Self {
        Self::one() / self
    }

    fn is_finite(self) -> bool {
        self.to_f64().is_finite()
    }

    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }
}

macro_rules! impl_real_for_float {
    ($t:ty) => {
        impl Real for $t {
            #[inline]
            fn from_f64(x: f64) -> Self {
                x as $t
            }
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
            #[inline]
            fn epsilon() -> f64 {
                <$t as Float>::epsilon() as f64
            }
            #[inline]
            fn sin(self) -> Self {
                Float::sin(self)
            }
            #[inline]
            fn cos(self) -> Self {
                Float::cos(self)
            }
            #[inline]
            fn sin_cos(self) -> (Self, Self) {
                Float::sin_cos(self)
            }
            #[inline]
            fn exp(self) -> Self {
                Float::exp(self)
            }
            #[inline]
            fn ln(self) -> Self {
                Float::ln(self)
            }
            #[inline]
            fn sqrt(self) -> Self {
                Float::sqrt(self)
            }
            #[inline]
            fn abs(self) -> Self {
                Float::abs(self)
            }
            #[inline]
            fn powi(self, n: i32) -> Self {
                Float::powi(self, n)
            }
            #[inline]
            fn atan2(self, other: Self) -> Self {
                Float::atan2(self, other)
            }
            #[inline]
            fn tan(self) -> Self {
                Float::tan(self)
            }
            #[inline]
            fn recip(self) -> Self {
                Float::recip(self)
            }
            #[inline]
            fn is_finite(self) -> bool {
                Float::is_finite(self)
            }
        }
    };
}

impl_real_for_float!(f32);
impl_real_for_float!(f64);

/// Lifts a slice of `f64` into any scalar type.
pub fn lift<T: Real>(xs: &[f64]) -> Vec<T> {
    xs.iter().map(|&x| T::from_f64(x)).collect()
}

/// Primal values of a slice of scalars.
pub fn primal<T: Real>(xs: &[T]) -> Vec<f64> {
    xs.iter().map(|x| x.to_f64()).collect()
}

pub(crate) fn all_finite<T: Real>(xs: &[T]) -> bool {
    xs.iter().all(|x| x.is_finite())
}

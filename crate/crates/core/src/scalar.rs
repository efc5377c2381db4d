//! Scalar abstractions.
//!
//! [`Scalar`] is the storage type for every numeric quantity in the crate
//! (`f32` or `f64`). [`Real`] is the arithmetic interface the differentiable
//! parts of the model are written against: it is implemented by every
//! [`Scalar`] (plain evaluation) and by [`crate::tape::Var`] (recorded
//! evaluation for reverse-mode differentiation).

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point storage type: `f32` or `f64`.
pub trait Scalar:
    'static
    + Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Sum
    + Send
    + Sync
    + Debug
    + Display
    + LowerExp
    + Real<Base = Self>
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numerically stable `ln(1 + e^x)`.
#[inline]
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid `1 / (1 + e^{-x})`.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Arithmetic used by differentiable code paths.
///
/// Non-smooth conventions: `relu'(0) = 0`; `min`/`max` route the derivative
/// to the attaining argument and to the first argument on ties.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    type Base: Scalar;

    /// A constant (never differentiated).
    fn cst(x: Self::Base) -> Self;
    fn value(&self) -> Self::Base;

    fn relu(self) -> Self;
    fn sigmoid(self) -> Self;
    fn softplus(self) -> Self;
    fn rtanh(self) -> Self;
    fn rsin(self) -> Self;
    fn rcos(self) -> Self;
    fn rmin(self, other: Self) -> Self;
    fn rmax(self, other: Self) -> Self;

    #[inline]
    fn square(self) -> Self {
        self * self
    }

    #[inline]
    fn rzero() -> Self {
        Self::cst(<Self::Base as num_traits::Zero>::zero())
    }
}

macro_rules! impl_real_for_float {
    ($t:ty) => {
        impl Real for $t {
            type Base = $t;

            #[inline]
            fn cst(x: $t) -> Self {
                x
            }
            #[inline]
            fn value(&self) -> $t {
                *self
            }
            #[inline]
            fn relu(self) -> Self {
                if self > 0.0 {
                    self
                } else {
                    0.0
                }
            }
            #[inline]
            fn sigmoid(self) -> Self {
                sigmoid(self)
            }
            #[inline]
            fn softplus(self) -> Self {
                softplus(self)
            }
            #[inline]
            fn rtanh(self) -> Self {
                <$t>::tanh(self)
            }
            #[inline]
            fn rsin(self) -> Self {
                <$t>::sin(self)
            }
            #[inline]
            fn rcos(self) -> Self {
                <$t>::cos(self)
            }
            #[inline]
            fn rmin(self, other: Self) -> Self {
                if self <= other {
                    self
                } else {
                    other
                }
            }
            #[inline]
            fn rmax(self, other: Self) -> Self {
                if self >= other {
                    self
                } else {
                    other
                }
            }
        }
    };
}

impl_real_for_float!(f32);
impl_real_for_float!(f64);

/// Read access to a flat parameter vector.
///
/// Plain slices hand out values; a tape-backed view records a fresh leaf per
/// read so adjoints can be scattered back to parameter indices afterwards.
pub trait ParamView<R: Real> {
    fn param(&self, idx: usize) -> R;
}

impl<R: Real> ParamView<R> for [R] {
    #[inline]
    fn param(&self, idx: usize) -> R {
        self[idx]
    }
}

impl<R: Real> ParamView<R> for Vec<R> {
    #[inline]
    fn param(&self, idx: usize) -> R {
        self[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softplus_is_stable_at_extremes() {
        assert_eq!(softplus(1000.0_f64), 1000.0);
        assert!(softplus(-1000.0_f64) >= 0.0);
        assert!((softplus(0.0_f64) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn min_max_tie_goes_to_first() {
        assert_eq!(Real::rmin(1.0_f64, 1.0), 1.0);
        assert_eq!(Real::rmax(-0.0_f64, 0.0).to_bits(), (-0.0_f64).to_bits());
    }

    #[test]
    fn sigmoid_symmetry() {
        for x in [-30.0, -1.0, 0.0, 0.5, 30.0] {
            let s: f64 = sigmoid(x);
            assert!((s + sigmoid(-x) - 1.0).abs() < 1e-15);
        }
    }
}

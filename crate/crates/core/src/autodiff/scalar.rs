//! Scalar abstraction over plain `f64` and tape-recorded variables.
//!
//! Network propagation code is written once, generically over [`Scalar`].
//! Instantiated at `f64` it evaluates values and input derivatives directly;
//! instantiated at [`crate::autodiff::Var`] the same code records an expression
//! graph whose reverse sweep yields exact parameter gradients, including
//! gradients of input-derivative quantities (nested differentiation).

use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    /// A constant in the same evaluation context as `self`.
    fn lift(self, c: f64) -> Self;

    /// The primal value.
    fn value(self) -> f64;

    fn tanh(self) -> Self;
    fn exp(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn ln(self) -> Self;

    /// Multiplication by a constant.
    fn scale(self, c: f64) -> Self {
        self * self.lift(c)
    }

    /// Addition of a constant.
    fn add_const(self, c: f64) -> Self {
        self + self.lift(c)
    }
}

impl Scalar for f64 {
    #[inline]
    fn lift(self, c: f64) -> Self {
        c
    }

    #[inline]
    fn value(self) -> f64 {
        self
    }

    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }

    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }

    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }

    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }

    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }

    #[inline]
    fn scale(self, c: f64) -> Self {
        self * c
    }

    #[inline]
    fn add_const(self, c: f64) -> Self {
        self + c
    }
}

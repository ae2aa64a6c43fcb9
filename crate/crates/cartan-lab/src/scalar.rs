//! Scalar field abstraction shared by the expression evaluator.
//!
//! Expressions evaluate over any [`Scalar`]: plain `f64` for pointwise values,
//! or truncated Taylor jets for derivatives. Both run the exact same operation
//! sequence, so an order-0 jet evaluation is bit-identical to the `f64` path.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// Numeric failures surfaced during evaluation of an expression or a
/// derived tensor formula.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericError {
    /// Argument outside the smooth domain of a primitive (sqrt/log of a
    /// non-positive value, fractional power of a non-positive base).
    #[error("domain error: {0}")]
    Domain(String),
    /// Division by a scalar whose value part is zero.
    #[error("division by zero")]
    DivisionByZero,
}

/// A differential-field scalar: arithmetic plus the smooth primitives the
/// expression language exposes.
///
/// Constants are built from an existing instance (`self.constant(..)`) so jet
/// implementations can reuse their coefficient-space handle.
pub trait Scalar:
    Clone + Sized + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    /// A constant with the same structure (e.g. jet space) as `self`.
    fn constant(&self, v: f64) -> Self;

    /// The value part.
    fn value(&self) -> f64;

    fn try_div(&self, rhs: &Self) -> Result<Self, NumericError>;

    /// Requires a strictly positive value part: on the punctured bundle the
    /// fundamental function is positive, and jets of sqrt at 0 are undefined.
    fn try_sqrt(&self) -> Result<Self, NumericError>;

    fn try_ln(&self) -> Result<Self, NumericError>;

    fn exp(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;

    /// Integer power, valid for any base (negative exponents divide).
    fn try_powi(&self, n: i64) -> Result<Self, NumericError>;

    /// Real power, requires a strictly positive base.
    fn try_powf(&self, e: f64) -> Result<Self, NumericError>;

    /// `Some(k)` when `self` is a constant holding an exact integer, used to
    /// route `a ^ b` through the integer-power path.
    fn const_integer(&self) -> Option<i64>;
}

impl Scalar for f64 {
    fn constant(&self, v: f64) -> Self {
        v
    }

    fn value(&self) -> f64 {
        *self
    }

    fn try_div(&self, rhs: &Self) -> Result<Self, NumericError> {
        if *rhs == 0.0 {
            return Err(NumericError::DivisionByZero);
        }
        Ok(self / rhs)
    }

    fn try_sqrt(&self) -> Result<Self, NumericError> {
        if *self <= 0.0 {
            return Err(NumericError::Domain(format!("sqrt of {self}")));
        }
        Ok(f64::sqrt(*self))
    }

    fn try_ln(&self) -> Result<Self, NumericError> {
        if *self <= 0.0 {
            return Err(NumericError::Domain(format!("log of {self}")));
        }
        Ok(f64::ln(*self))
    }

    fn exp(&self) -> Self {
        f64::exp(*self)
    }

    fn sin(&self) -> Self {
        f64::sin(*self)
    }

    fn cos(&self) -> Self {
        f64::cos(*self)
    }

    fn try_powi(&self, n: i64) -> Result<Self, NumericError> {
        if *self == 0.0 && n < 0 {
            return Err(NumericError::DivisionByZero);
        }
        // Exponentiation by squaring, matching the jet implementation op for op.
        let mut base = *self;
        let mut k = n.unsigned_abs();
        let mut acc = 1.0f64;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc * base;
            }
            k >>= 1;
            if k > 0 {
                base = base * base;
            }
        }
        if n < 0 {
            acc = 1.0 / acc;
        }
        Ok(acc)
    }

    fn try_powf(&self, e: f64) -> Result<Self, NumericError> {
        if *self <= 0.0 {
            return Err(NumericError::Domain(format!("{self} ^ {e}")));
        }
        Ok(f64::powf(*self, e))
    }

    fn const_integer(&self) -> Option<i64> {
        if self.fract() == 0.0 && self.abs() < 2f64.powi(53) {
            Some(*self as i64)
        } else {
            None
        }
    }
}

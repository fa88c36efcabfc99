//! Scalar abstractions.
//!
//! Kernel arithmetic is generic over any [`Real`] (f32 or f64). Quantities that
//! leave the f64 exponent range, such as the level thresholds of the schedule
//! recursions, are carried as [`LogNum`]: a nonnegative number stored by its
//! natural logarithm.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Div, Mul, Sub};

use num_traits::{Float, FromPrimitive, NumCast, One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Floating-point scalar used by the exact kernel code.
pub trait Real: Float + FromPrimitive + Sum + fmt::Debug + fmt::Display + Send + Sync + 'static {
    fn of(x: f64) -> Self {
        <Self as NumCast>::from(x).expect("finite constant")
    }
}

impl<T> Real for T where T: Float + FromPrimitive + Sum + fmt::Debug + fmt::Display + Send + Sync + 'static {}

/// Nonnegative number stored as its natural logarithm (`ln = -inf` is zero).
#[derive(Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogNum {
    ln: f64,
}

impl LogNum {
    pub const ZERO: LogNum = LogNum { ln: f64::NEG_INFINITY };
    pub const ONE: LogNum = LogNum { ln: 0.0 };

    pub fn from_ln(ln: f64) -> Self {
        debug_assert!(!ln.is_nan(), "LogNum from NaN");
        LogNum { ln }
    }

    /// Panics on negative input.
    pub fn new(x: f64) -> Self {
        assert!(x >= 0.0, "LogNum requires a nonnegative value, got {x}");
        LogNum { ln: x.ln() }
    }

    pub fn ln(self) -> f64 {
        self.ln
    }

    /// Value as f64; underflows to 0 and overflows to +inf.
    pub fn value(self) -> f64 {
        self.ln.exp()
    }

    pub fn is_zero(self) -> bool {
        self.ln == f64::NEG_INFINITY
    }

    /// True when the value is a normal, finite f64.
    pub fn fits_f64(self) -> bool {
        let v = self.value();
        v.is_finite() && (v == 0.0 && self.is_zero() || v >= f64::MIN_POSITIVE)
    }

    pub fn powf(self, e: f64) -> Self {
        if self.is_zero() {
            return if e == 0.0 { LogNum::ONE } else { LogNum::ZERO };
        }
        LogNum { ln: self.ln * e }
    }

    pub fn sqrt(self) -> Self {
        self.powf(0.5)
    }

    pub fn recip(self) -> Self {
        LogNum { ln: -self.ln }
    }

    /// `1 - self`, for values in [0, 1].
    pub fn one_minus(self) -> Self {
        assert!(self.ln <= 0.0, "one_minus needs a value <= 1");
        LogNum { ln: (-self.value()).ln_1p() }
    }

    /// `self - other` when nonnegative, else `None`.
    pub fn checked_sub(self, other: Self) -> Option<Self> {
        if other.is_zero() {
            return Some(self);
        }
        if other.ln > self.ln {
            return None;
        }
        if other.ln == self.ln {
            return Some(LogNum::ZERO);
        }
        Some(LogNum { ln: self.ln + (-(other.ln - self.ln).exp()).ln_1p() })
    }

    pub fn max(self, other: Self) -> Self {
        if self.ln >= other.ln {
            self
        } else {
            other
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self.ln <= other.ln {
            self
        } else {
            other
        }
    }

    /// `self <= other` on logarithms, with slack `tol * max(1, |ln other|)`.
    pub fn le_tol(self, other: Self, tol: f64) -> bool {
        if self.is_zero() {
            return true;
        }
        self.ln <= other.ln + tol * other.ln.abs().max(1.0)
    }
}

impl fmt::Debug for LogNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogNum(e^{})", self.ln)
    }
}

impl fmt::Display for LogNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.fits_f64() {
            write!(f, "{:e}", self.value())
        } else {
            write!(f, "exp({})", self.ln)
        }
    }
}

impl PartialOrd for LogNum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.ln.partial_cmp(&other.ln)
    }
}

impl Add for LogNum {
    type Output = LogNum;
    fn add(self, rhs: Self) -> Self {
        let (hi, lo) = if self.ln >= rhs.ln { (self, rhs) } else { (rhs, self) };
        if lo.is_zero() {
            return hi;
        }
        LogNum { ln: hi.ln + (lo.ln - hi.ln).exp().ln_1p() }
    }
}

/// Saturates at zero.
impl Sub for LogNum {
    type Output = LogNum;
    fn sub(self, rhs: Self) -> Self {
        self.checked_sub(rhs).unwrap_or(LogNum::ZERO)
    }
}

impl Mul for LogNum {
    type Output = LogNum;
    fn mul(self, rhs: Self) -> Self {
        if self.is_zero() || rhs.is_zero() {
            return LogNum::ZERO;
        }
        LogNum { ln: self.ln + rhs.ln }
    }
}

impl Div for LogNum {
    type Output = LogNum;
    fn div(self, rhs: Self) -> Self {
        if self.is_zero() {
            return LogNum::ZERO;
        }
        LogNum { ln: self.ln - rhs.ln }
    }
}

impl Sum for LogNum {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(LogNum::ZERO, |a, b| a + b)
    }
}

impl Zero for LogNum {
    fn zero() -> Self {
        LogNum::ZERO
    }
    fn is_zero(&self) -> bool {
        LogNum::is_zero(*self)
    }
}

impl One for LogNum {
    fn one() -> Self {
        LogNum::ONE
    }
}

impl ToPrimitive for LogNum {
    fn to_i64(&self) -> Option<i64> {
        self.value().to_i64()
    }
    fn to_u64(&self) -> Option<u64> {
        self.value().to_u64()
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.value())
    }
}

impl FromPrimitive for LogNum {
    fn from_i64(n: i64) -> Option<Self> {
        (n >= 0).then(|| LogNum::new(n as f64))
    }
    fn from_u64(n: u64) -> Option<Self> {
        Some(LogNum::new(n as f64))
    }
    fn from_f64(x: f64) -> Option<Self> {
        (x >= 0.0).then(|| LogNum::new(x))
    }
}

/// Arithmetic needed by distribution and quantile code; satisfied by
/// f32, f64 and [`LogNum`].
pub trait Weight:
    Copy
    + PartialOrd
    + fmt::Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    fn from_f(x: f64) -> Self {
        Self::from_f64(x).expect("representable weight")
    }
    fn to_f(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Weight for T where
    T: Copy
        + PartialOrd
        + fmt::Debug
        + Zero
        + One
        + Add<Output = T>
        + Sub<Output = T>
        + Mul<Output = T>
        + Div<Output = T>
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}

/// Floor of `x`, snapping values within relative `tol` of an integer onto it:
/// `(8/9) / (1/81)` evaluates a hair below 72.
pub fn robust_floor(x: f64, tol: f64) -> f64 {
    let r = x.round();
    if (r - x).abs() <= tol * x.abs().max(1.0) {
        r
    } else {
        x.floor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_arithmetic_matches_f64() {
        let a = LogNum::new(3.5);
        let b = LogNum::new(0.25);
        assert!(((a + b).value() - 3.75).abs() < 1e-14);
        assert!(((a - b).value() - 3.25).abs() < 1e-14);
        assert!(((a * b).value() - 0.875).abs() < 1e-14);
        assert!(((a / b).value() - 14.0).abs() < 1e-13);
        assert!((b.one_minus().value() - 0.75).abs() < 1e-15);
        assert!(b.checked_sub(a).is_none());
    }

    #[test]
    fn zero_behaves() {
        let z = LogNum::ZERO;
        assert_eq!((z + LogNum::new(2.0)).value(), 2.0);
        assert!((z * LogNum::new(2.0)).is_zero());
        assert_eq!(z.value(), 0.0);
    }

    #[test]
    fn huge_values_survive() {
        let t = LogNum::from_ln(13122.0);
        let th = t.recip();
        assert!(th.value() == 0.0 && (th * t).ln().abs() < 1e-12);
    }

    #[test]
    fn robust_floor_snaps() {
        assert_eq!(robust_floor(71.99999999999999, 1e-12), 72.0);
        assert_eq!(robust_floor(71.5, 1e-12), 71.0);
    }
}

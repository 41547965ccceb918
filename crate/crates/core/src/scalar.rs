//! Scalar abstraction used by observables and ergodic means.
//!
//! Means are computed from prefix sums, so every scalar carries an
//! accumulator type: a double-double running sum for the floating types
//! and the exact type itself for rationals.

use std::fmt::Debug;
use std::ops::{Add, Neg, Sub};

use num_rational::Rational64;
use num_traits::{Num, Signed, ToPrimitive};

/// A running sum of scalars.
pub trait Accumulator<S>:
    Copy + Debug + Send + Sync + Add<Output = Self> + Sub<Output = Self>
{
    fn zero() -> Self;
    fn of(x: S) -> Self;
    /// Multiplies the sum by a non-negative integer.
    fn times(self, k: u64) -> Self;
    fn value(self) -> S;
}

/// Scalar types an observable may take values in.
pub trait Scalar: Num + Signed + Copy + PartialOrd + Debug + Send + Sync + 'static {
    type Accum: Accumulator<Self>;

    /// The value `num / den`.
    fn from_ratio(num: i64, den: i64) -> Self;
    /// Conversion from a real; rationals use a best approximation.
    fn from_real(x: f64) -> Option<Self>;
    fn as_f64(self) -> f64;
    fn is_finite_value(self) -> bool;

    fn from_count(n: usize) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

/// Sums a slice with the scalar's accumulator.
pub fn sum<S: Scalar>(values: &[S]) -> S {
    values
        .iter()
        .fold(S::Accum::zero(), |acc, &v| acc + S::Accum::of(v))
        .value()
}

/// Double-double running sum (Knuth two-sum with renormalisation).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Compensated {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl Compensated {
    pub fn new(x: f64) -> Self {
        Compensated { hi: x, lo: 0.0 }
    }

    pub fn total(self) -> f64 {
        self.hi + self.lo
    }
}

impl Add for Compensated {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (hi, lo) = fast_two_sum(s, e + self.lo + rhs.lo);
        Compensated { hi, lo }
    }
}

impl Neg for Compensated {
    type Output = Self;
    fn neg(self) -> Self {
        Compensated {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Compensated {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Compensated {
    fn scaled(self, k: u64) -> Self {
        let k = k as f64;
        let p = self.hi * k;
        let e = self.hi.mul_add(k, -p) + self.lo * k;
        let (hi, lo) = fast_two_sum(p, e);
        Compensated { hi, lo }
    }
}

impl Accumulator<f64> for Compensated {
    fn zero() -> Self {
        Compensated::default()
    }
    fn of(x: f64) -> Self {
        Compensated::new(x)
    }
    fn times(self, k: u64) -> Self {
        self.scaled(k)
    }
    fn value(self) -> f64 {
        self.total()
    }
}

impl Accumulator<f32> for Compensated {
    fn zero() -> Self {
        Compensated::default()
    }
    fn of(x: f32) -> Self {
        Compensated::new(x as f64)
    }
    fn times(self, k: u64) -> Self {
        self.scaled(k)
    }
    fn value(self) -> f32 {
        self.total() as f32
    }
}

impl Scalar for f64 {
    type Accum = Compensated;

    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_real(x: f64) -> Option<Self> {
        Some(x)
    }
    fn as_f64(self) -> f64 {
        self
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for f32 {
    type Accum = Compensated;

    fn from_ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }
    fn from_real(x: f64) -> Option<Self> {
        Some(x as f32)
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

/// Exact running sum of rationals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactSum(pub Rational64);

impl Add for ExactSum {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        ExactSum(self.0 + rhs.0)
    }
}

impl Sub for ExactSum {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        ExactSum(self.0 - rhs.0)
    }
}

impl Accumulator<Rational64> for ExactSum {
    fn zero() -> Self {
        ExactSum(Rational64::from_integer(0))
    }
    fn of(x: Rational64) -> Self {
        ExactSum(x)
    }
    fn times(self, k: u64) -> Self {
        ExactSum(self.0 * Rational64::from_integer(k as i64))
    }
    fn value(self) -> Rational64 {
        self.0
    }
}

impl Scalar for Rational64 {
    type Accum = ExactSum;

    fn from_ratio(num: i64, den: i64) -> Self {
        Rational64::new(num, den)
    }
    fn from_real(x: f64) -> Option<Self> {
        Rational64::approximate_float(x)
    }
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
    fn is_finite_value(self) -> bool {
        true
    }
}

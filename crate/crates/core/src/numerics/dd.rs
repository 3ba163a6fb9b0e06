//! Double-double ("double-width") arithmetic built from error-free
//! transformations.
//!
//! A [`DoubleDouble`] stores an unevaluated sum `hi + lo` with
//! `|lo| <= ulp(hi) / 2`, giving roughly 106 bits of significand. It is used
//! for the alternating binomial sums of the AR(2) closed forms, where the
//! individual terms can exceed the result by twenty orders of magnitude.

use std::cmp::Ordering;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

/// Knuth's branch-free two-sum: `a + b == s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let e = b - (s - a);
    (s, e)
}

/// `a * b == p + e` exactly (requires a correctly rounded fused multiply-add).
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let e = a.mul_add(b, -p);
    (p, e)
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };
    pub const ONE: DoubleDouble = DoubleDouble { hi: 1.0, lo: 0.0 };

    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        DoubleDouble { hi, lo }
    }

    /// Exact conversion of an unsigned integer below 2^106.
    pub fn from_u128(v: u128) -> Self {
        let hi = v as f64;
        // `hi` is the nearest double, so the remainder fits in a signed 128-bit
        // integer and is itself exactly representable when v < 2^106.
        let rem = v as i128 - hi as i128;
        DoubleDouble::new(hi, rem as f64)
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    /// Integer power by repeated squaring.
    pub fn powi(self, mut exp: u32) -> Self {
        let mut base = self;
        let mut acc = DoubleDouble::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    /// Successive powers `self^0 ..= self^max`.
    pub fn powers(self, max: usize) -> Vec<DoubleDouble> {
        let mut out = Vec::with_capacity(max + 1);
        let mut acc = DoubleDouble::ONE;
        out.push(acc);
        for _ in 0..max {
            acc *= self;
            out.push(acc);
        }
        out
    }
}

impl From<f64> for DoubleDouble {
    fn from(v: f64) -> Self {
        DoubleDouble { hi: v, lo: 0.0 }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (s, e) = two_sum(self.hi, rhs.hi);
        let (t, f) = two_sum(self.lo, rhs.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        DoubleDouble { hi, lo }
    }
}

impl Add<f64> for DoubleDouble {
    type Output = Self;
    fn add(self, rhs: f64) -> Self {
        let (s, e) = two_sum(self.hi, rhs);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        DoubleDouble { hi, lo }
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let (p, e) = two_prod(self.hi, rhs.hi);
        let e = e + (self.hi * rhs.lo + self.lo * rhs.hi);
        let (hi, lo) = quick_two_sum(p, e);
        DoubleDouble { hi, lo }
    }
}

impl Mul<f64> for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        let (p, e) = two_prod(self.hi, rhs);
        let (hi, lo) = quick_two_sum(p, e + self.lo * rhs);
        DoubleDouble { hi, lo }
    }
}

impl MulAssign for DoubleDouble {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        // Two Newton-style correction steps on the quotient.
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * q1;
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * q2;
        let q3 = r.hi / rhs.hi;
        DoubleDouble::new(q1, q2) + q3
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Equal) => self.lo.partial_cmp(&other.lo),
            ord => ord,
        }
    }
}

impl Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(DoubleDouble::ZERO, |acc, x| acc + x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_lost_low_bits() {
        let big = DoubleDouble::from(1.0e16);
        let sum = big + 1.0 + 1.0 - big;
        assert_eq!(sum.to_f64(), 2.0);
    }

    #[test]
    fn product_error_is_captured() {
        let a = DoubleDouble::from(1.0 + f64::EPSILON);
        let sq = a * a;
        // (1 + e)^2 = 1 + 2e + e^2; the e^2 term lives in `lo`.
        assert_eq!(sq.hi(), 1.0 + 2.0 * f64::EPSILON);
        assert_eq!(sq.lo(), f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn division_is_close_to_double_width() {
        let third = DoubleDouble::ONE / DoubleDouble::from(3.0);
        let back = third * 3.0 - DoubleDouble::ONE;
        assert!(back.to_f64().abs() < 1e-30);
    }

    #[test]
    fn u128_conversion_is_exact() {
        let v: u128 = 118_264_581_564_861_424; // C(60, 30)
        let d = DoubleDouble::from_u128(v);
        assert_eq!(d.hi() as u128 as i128 + d.lo() as i128, v as i128);
    }

    #[test]
    fn powi_matches_repeated_multiplication() {
        let x = DoubleDouble::from(1.1);
        let mut acc = DoubleDouble::ONE;
        for _ in 0..37 {
            acc *= x;
        }
        let p = x.powi(37);
        assert!(((p - acc) / acc).to_f64().abs() < 1e-30);
    }
}

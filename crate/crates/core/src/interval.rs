//! Closed intervals with outward-padded endpoints.
//!
//! Every operation pads the computed endpoints by a couple of ulps so the
//! enclosure survives the rounding of the endpoint arithmetic itself.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

fn down<T: Real>(x: T) -> T {
    if x.is_infinite() {
        return x;
    }
    x - x.abs() * T::lit(2.0) * T::unit_roundoff() - T::min_positive_value()
}

fn up<T: Real>(x: T) -> T {
    if x.is_infinite() {
        return x;
    }
    x + x.abs() * T::lit(2.0) * T::unit_roundoff() + T::min_positive_value()
}

impl<T: Real> Interval<T> {
    pub fn new(lo: T, hi: T) -> Self {
        debug_assert!(!(lo > hi), "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: T) -> Self {
        Self { lo: x, hi: x }
    }

    /// `[value − err, value + err]`, padded outward.
    pub fn around(value: T, err: T) -> Self {
        Self { lo: down(value - err), hi: up(value + err) }
    }

    pub fn mid(&self) -> T {
        (self.lo + self.hi) * T::lit(0.5)
    }

    pub fn radius(&self) -> T {
        (self.hi - self.lo) * T::lit(0.5)
    }

    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    pub fn contains(&self, x: T) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn is_positive(&self) -> bool {
        self.lo > T::zero()
    }

    pub fn add(self, o: Self) -> Self {
        Self { lo: down(self.lo + o.lo), hi: up(self.hi + o.hi) }
    }

    pub fn sub(self, o: Self) -> Self {
        Self { lo: down(self.lo - o.hi), hi: up(self.hi - o.lo) }
    }

    pub fn neg(self) -> Self {
        Self { lo: -self.hi, hi: -self.lo }
    }

    pub fn scale(self, c: T) -> Self {
        let (a, b) = (self.lo * c, self.hi * c);
        Self { lo: down(a.min(b)), hi: up(a.max(b)) }
    }

    pub fn mul(self, o: Self) -> Self {
        let p = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = p.iter().copied().fold(T::infinity(), T::min);
        let hi = p.iter().copied().fold(T::neg_infinity(), T::max);
        Self { lo: down(lo), hi: up(hi) }
    }

    /// Division; the divisor must not contain zero.
    pub fn div(self, o: Self) -> Self {
        assert!(o.lo > T::zero() || o.hi < T::zero(), "interval division by an interval containing zero");
        let q = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        let lo = q.iter().copied().fold(T::infinity(), T::min);
        let hi = q.iter().copied().fold(T::neg_infinity(), T::max);
        Self { lo: down(lo), hi: up(hi) }
    }

    pub fn sqr(self) -> Self {
        if self.lo >= T::zero() {
            Self { lo: down(self.lo * self.lo).max(T::zero()), hi: up(self.hi * self.hi) }
        } else if self.hi <= T::zero() {
            Self { lo: down(self.hi * self.hi).max(T::zero()), hi: up(self.lo * self.lo) }
        } else {
            Self { lo: T::zero(), hi: up((self.lo * self.lo).max(self.hi * self.hi)) }
        }
    }

    pub fn powi(self, k: u32) -> Self {
        let mut acc = Self::point(T::one());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Square root of the nonnegative part.
    pub fn sqrt(self) -> Self {
        let lo = self.lo.max(T::zero());
        Self { lo: down(lo.sqrt()).max(T::zero()), hi: up(self.hi.max(T::zero()).sqrt()) }
    }

    pub fn hull(self, o: Self) -> Self {
        Self { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi) }
    }

    pub fn map<U: Real>(self, f: impl Fn(T) -> U) -> Interval<U> {
        Interval { lo: down(f(self.lo)), hi: up(f(self.hi)) }
    }
}

impl<T: Real> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_encloses() {
        let a = Interval::around(2.0f64, 0.1);
        let b = Interval::around(-1.0f64, 0.5);
        let p = a.mul(b);
        assert!(p.contains(2.1 * -1.5) && p.contains(1.9 * -0.5));
        let q = a.div(Interval::around(4.0, 1.0));
        assert!(q.contains(2.1 / 3.0) && q.contains(1.9 / 5.0));
        let s = b.sqr();
        assert!(s.contains(0.25) && s.lo > 0.24);
        assert_eq!(Interval::around(0.0f64, 1.0).sqr().lo, 0.0);
        assert!(s.contains(2.25));
        assert!(a.sub(a).contains(0.0));
    }

    #[test]
    #[should_panic]
    fn division_by_zero_interval_panics() {
        let _ = Interval::point(1.0f64).div(Interval::around(0.0, 1.0));
    }
}

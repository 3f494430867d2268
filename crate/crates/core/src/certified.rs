use serde::{Deserialize, Serialize};

use crate::interval::Interval;
use crate::scalar::Real;

/// A computed value with a rigorous absolute error bound.
///
/// `radius_used` is the truncation radius of the underlying lattice sum, in the
/// norm induced by the Gaussian parameter (Euclidean for a scalar `s`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedValue<T> {
    pub value: T,
    pub err: T,
    #[serde(rename = "radius")]
    pub radius_used: T,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl<T: Real> CertifiedValue<T> {
    pub fn new(value: T, err: T, radius_used: T) -> Self {
        Self { value, err, radius_used, warnings: Vec::new() }
    }

    pub fn exact(value: T) -> Self {
        Self::new(value, T::zero(), T::zero())
    }

    pub fn interval(&self) -> Interval<T> {
        Interval::around(self.value, self.err)
    }

    pub fn lower(&self) -> T {
        self.value - self.err
    }

    pub fn upper(&self) -> T {
        self.value + self.err
    }

    /// Builds a value from an enclosure: midpoint value, half-width error.
    pub fn from_interval(iv: Interval<T>, radius_used: T) -> Self {
        let v = iv.mid();
        let err = (iv.hi - v).max(v - iv.lo).round_up_bound();
        Self::new(v, err, radius_used)
    }

    /// Like [`Self::from_interval`] but keeps a separately computed central value.
    pub fn centered(value: T, iv: Interval<T>, radius_used: T) -> Self {
        let err = (iv.hi - value).max(value - iv.lo).max(T::zero()).round_up_bound();
        Self::new(value, err, radius_used)
    }

    pub fn with_warnings(mut self, warnings: Vec<String>) -> Self {
        self.warnings.extend(warnings);
        self
    }

    /// Quotient of two positive certified values:
    /// `err = (v₁+e₁)/(v₂−e₂) − v₁/v₂`, joined symmetrically with the lower side.
    pub fn quotient(num: &Self, den: &Self) -> Self {
        assert!(den.value - den.err > T::zero(), "denominator interval must be positive");
        let v = num.value / den.value;
        let upper = num.interval().div(den.interval());
        let err = (upper.hi - v).max(v - upper.lo).max(T::zero()).round_up_bound();
        let mut out = Self::new(v, err, num.radius_used.max(den.radius_used));
        out.warnings.extend(num.warnings.iter().cloned());
        out.warnings.extend(den.warnings.iter().cloned());
        out
    }

    pub fn product(a: &Self, b: &Self) -> Self {
        let v = a.value * b.value;
        let iv = a.interval().mul(b.interval());
        let mut out = Self::centered(v, iv, a.radius_used.max(b.radius_used));
        out.warnings.extend(a.warnings.iter().cloned());
        out.warnings.extend(b.warnings.iter().cloned());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotient_of_equal_supports_is_exact_one() {
        let a = CertifiedValue::new(2.0f64, 0.0, 1.0);
        let q = CertifiedValue::quotient(&a, &a);
        assert_eq!(q.value, 1.0);
        assert!(q.err < 1e-15);
    }

    #[test]
    fn quotient_bound_is_one_sided_formula_or_wider() {
        let n = CertifiedValue::new(1.0f64, 1e-3, 1.0);
        let d = CertifiedValue::new(2.0f64, 1e-3, 1.0);
        let q = CertifiedValue::quotient(&n, &d);
        let formula = (1.0 + 1e-3) / (2.0 - 1e-3) - 0.5;
        assert!(q.err >= formula);
        assert!(q.err < formula * 1.01);
    }

    #[test]
    fn json_shape() {
        let c = CertifiedValue::new(0.5f64, 1e-12, 3.0);
        let j = serde_json::to_value(&c).unwrap();
        assert_eq!(j, serde_json::json!({"value": 0.5, "err": 1e-12, "radius": 3.0}));
        let back: CertifiedValue<f64> = serde_json::from_value(j).unwrap();
        assert_eq!(back, c);
    }
}

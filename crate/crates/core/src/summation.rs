//! Compensated (Neumaier / Kahan–Babuška) accumulation.

use crate::scalar::Real;

/// Running sum with a compensation term; also tracks `Σ|xᵢ|`, which bounds the
/// rounding error of the compensated result.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
    abs_sum: T,
    count: usize,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero(), abs_sum: T::zero(), count: 0 }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp = self.comp + ((self.sum - t) + x);
        } else {
            self.comp = self.comp + ((x - t) + self.sum);
        }
        self.sum = t;
        self.abs_sum = self.abs_sum + x.abs();
        self.count += 1;
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }

    pub fn abs_sum(&self) -> T {
        self.abs_sum
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Bound on `|value() − exact sum of the added (already rounded) terms|`:
    /// `2u·|S| + 2n·u²·Σ|xᵢ|`, padded.
    pub fn rounding_bound(&self) -> T {
        let u = T::unit_roundoff();
        let n = T::from_usize(self.count.max(1)).unwrap_or_else(T::max_value);
        (T::lit(2.0) * u * self.value().abs() + T::lit(4.0) * n * u * u * self.abs_sum).round_up_bound()
    }
}

impl<T: Real> FromIterator<T> for CompensatedSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_low_bits() {
        let xs = [1.0f64, 1e100, 1.0, -1e100];
        let s: CompensatedSum<f64> = xs.iter().copied().collect();
        assert_eq!(s.value(), 2.0);
        assert_eq!(xs.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn harmonic_sum_f32_beats_naive() {
        let mut naive = 0.0f32;
        let mut s = CompensatedSum::<f32>::new();
        let mut exact = 0.0f64;
        for k in 1..200_000 {
            let x = 1.0 / k as f32;
            naive += x;
            s.add(x);
            exact += x as f64;
        }
        assert!((s.value() as f64 - exact).abs() <= s.rounding_bound() as f64 + 1e-6);
        assert!((s.value() as f64 - exact).abs() < (naive as f64 - exact).abs());
    }
}

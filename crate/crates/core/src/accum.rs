//! Compensated accumulators for long, order-fixed reductions.

use crate::scalar::Real;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry = self.carry + ((self.sum - t) + x);
        } else {
            self.carry = self.carry + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.carry);
    }

    pub fn value(&self) -> T {
        self.sum + self.carry
    }
}

/// Running count, Σx, Σx², min and max of a stream of non-negative distances.
#[derive(Debug, Clone, Copy)]
pub struct MomentAccumulator<T> {
    pub count: u64,
    pub sum: CompensatedSum<T>,
    pub sum_sq: CompensatedSum<T>,
    pub min: T,
    pub max: T,
}

impl<T: Real> Default for MomentAccumulator<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> MomentAccumulator<T> {
    pub fn new() -> Self {
        Self {
            count: 0,
            sum: CompensatedSum::new(),
            sum_sq: CompensatedSum::new(),
            min: T::infinity(),
            max: T::neg_infinity(),
        }
    }

    #[inline]
    pub fn push(&mut self, d: T) {
        self.count += 1;
        self.sum.add(d);
        self.sum_sq.add(d * d);
        if d < self.min {
            self.min = d;
        }
        if d > self.max {
            self.max = d;
        }
    }

    /// Fold in another partial. Merge order is part of the result, so callers
    /// merge partials in index order.
    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum.merge(&other.sum);
        self.sum_sq.merge(&other.sum_sq);
        if other.min < self.min {
            self.min = other.min;
        }
        if other.max > self.max {
            self.max = other.max;
        }
    }

    /// Every pushed value counted `factor` times. Exact for power-of-two factors.
    pub fn scaled(&self, factor: u64) -> Self {
        let f = T::lit(factor as f64);
        Self {
            count: self.count * factor,
            sum: CompensatedSum {
                sum: self.sum.sum * f,
                carry: self.sum.carry * f,
            },
            sum_sq: CompensatedSum {
                sum: self.sum_sq.sum * f,
                carry: self.sum_sq.carry * f,
            },
            min: self.min,
            max: self.max,
        }
    }
}

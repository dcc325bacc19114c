//! Streaming mean/variance with an order-deterministic merge.

use crate::scalar::Real;

/// Welford accumulator; `merge` uses the pairwise update so block results can
/// be combined in a fixed order.
#[derive(Debug, Clone, Copy)]
pub struct MeanVar<T> {
    count: u64,
    mean: T,
    m2: T,
}

impl<T: Real> Default for MeanVar<T> {
    fn default() -> Self {
        Self { count: 0, mean: T::zero(), m2: T::zero() }
    }
}

impl<T: Real> MeanVar<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: T) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / T::lit(self.count as f64);
        self.m2 = self.m2 + delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n_a = T::lit(self.count as f64);
        let n_b = T::lit(other.count as f64);
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        self.mean = self.mean + delta * n_b / n;
        self.m2 = self.m2 + other.m2 + delta * delta * n_a * n_b / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> T {
        self.mean
    }

    /// Unbiased sample variance (zero for fewer than two observations).
    pub fn variance(&self) -> T {
        if self.count < 2 {
            T::zero()
        } else {
            (self.m2 / T::lit((self.count - 1) as f64)).max(T::zero())
        }
    }

    /// Standard error of the mean.
    pub fn stderr(&self) -> T {
        if self.count == 0 {
            T::zero()
        } else {
            (self.variance() / T::lit(self.count as f64)).sqrt()
        }
    }
}

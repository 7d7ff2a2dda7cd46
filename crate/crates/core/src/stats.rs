//! Streaming mean/variance accumulation and Monte Carlo estimates.

use serde::Serialize;

/// A scalar Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateWithError {
    pub value: f64,
    /// Sample standard deviation over `sqrt(samples)`. `NaN` when fewer than
    /// two samples were averaged.
    pub std_error: f64,
    pub samples: usize,
}

impl EstimateWithError {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            samples: 0,
        }
    }

    /// Root-sum-square of the two standard errors.
    pub fn combined_se(&self, other: &Self) -> f64 {
        self.std_error.hypot(other.std_error)
    }

    /// `|self - other| <= k * combined SE`.
    pub fn agrees_with(&self, other: &Self, k: f64) -> bool {
        (self.value - other.value).abs() <= k * self.combined_se(other)
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Welford accumulator that merges deterministically (Chan et al.).
///
/// Parallel code accumulates one instance per fixed-size chunk and merges them
/// in chunk order, so the result does not depend on the worker count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    count: usize,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; `NaN` below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self) -> EstimateWithError {
        let std_error = (self.variance() / self.count as f64).sqrt();
        EstimateWithError {
            value: self.mean,
            std_error,
            samples: self.count,
        }
    }
}

impl FromIterator<f64> for MeanAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Merge accumulators in iteration order.
pub fn merge_all<'a, I: IntoIterator<Item = &'a MeanAccumulator>>(parts: I) -> MeanAccumulator {
    let mut acc = MeanAccumulator::new();
    for p in parts {
        acc.merge(p);
    }
    acc
}

/// Binomial proportion estimate with standard error `sqrt(p(1-p)/m)`.
pub fn proportion(hits: usize, total: usize) -> EstimateWithError {
    let p = hits as f64 / total as f64;
    EstimateWithError {
        value: p,
        std_error: (p * (1.0 - p) / total as f64).sqrt(),
        samples: total,
    }
}

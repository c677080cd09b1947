//! Chain traces and Monte-Carlo error estimates.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Number of batches used for batch-means standard errors.
pub const DEFAULT_BATCHES: usize = 50;

/// A seeded sequence of recorded chain values.
///
/// `steps[k]` is the chain step at which `values[k]` was recorded; the first
/// `burn_in` entries are warm-up and excluded from estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace<V> {
    pub seed: u64,
    pub burn_in: usize,
    pub steps: Vec<u64>,
    pub values: Vec<V>,
}

impl<V> ChainTrace<V> {
    pub fn new(seed: u64, burn_in: usize) -> Self {
        Self { seed, burn_in, steps: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, step: u64, value: V) {
        self.steps.push(step);
        self.values.push(value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn retained(&self) -> &[V] {
        &self.values[self.burn_in.min(self.values.len())..]
    }
}

pub fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    xs.iter().copied().sum::<T>() / T::from_count(xs.len())
}

/// Sample standard deviation (denominator `n - 1`).
pub fn std_dev<T: Real>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::zero();
    }
    let m = mean(xs);
    let ss: T = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    (ss / T::from_count(xs.len() - 1)).sqrt()
}

/// Batch index of element `k` out of `n` split into `batches` near-equal runs.
#[inline]
pub fn batch_of(k: usize, n: usize, batches: usize) -> usize {
    k * batches / n
}

/// Batch-means standard error of the mean of a correlated series.
pub fn batch_means_se<T: Real>(xs: &[T], batches: usize) -> T {
    let n = xs.len();
    if n < 2 {
        return T::zero();
    }
    let b = batches.min(n).max(2);
    let mut sums = vec![T::zero(); b];
    let mut counts = vec![0usize; b];
    for (k, &x) in xs.iter().enumerate() {
        let j = batch_of(k, n, b);
        sums[j] = sums[j] + x;
        counts[j] += 1;
    }
    let means: Vec<T> = sums.iter().zip(&counts).map(|(&s, &c)| s / T::from_count(c)).collect();
    std_dev(&means) / T::from_count(b).sqrt()
}

/// Accumulates batch means of several scalar series at once.
#[derive(Debug, Clone)]
pub(crate) struct BatchAccumulator<T> {
    n: usize,
    batches: usize,
    seen: usize,
    current: usize,
    count_in_batch: usize,
    batch_sum: Vec<T>,
    sum_of_means: Vec<T>,
    sum_sq_of_means: Vec<T>,
}

impl<T: Real> BatchAccumulator<T> {
    pub fn new(width: usize, n: usize, batches: usize) -> Self {
        let batches = batches.min(n).max(1);
        Self {
            n,
            batches,
            seen: 0,
            current: 0,
            count_in_batch: 0,
            batch_sum: vec![T::zero(); width],
            sum_of_means: vec![T::zero(); width],
            sum_sq_of_means: vec![T::zero(); width],
        }
    }

    fn close_batch(&mut self) {
        if self.count_in_batch == 0 {
            return;
        }
        let c = T::from_count(self.count_in_batch);
        for k in 0..self.batch_sum.len() {
            let m = self.batch_sum[k] / c;
            self.sum_of_means[k] = self.sum_of_means[k] + m;
            self.sum_sq_of_means[k] = self.sum_sq_of_means[k] + m * m;
            self.batch_sum[k] = T::zero();
        }
        self.count_in_batch = 0;
    }

    /// Add one observation; `values(k)` yields component `k`.
    pub fn push_with(&mut self, mut values: impl FnMut(usize) -> T) {
        let b = batch_of(self.seen, self.n, self.batches);
        if b != self.current {
            self.close_batch();
            self.current = b;
        }
        for k in 0..self.batch_sum.len() {
            self.batch_sum[k] = self.batch_sum[k] + values(k);
        }
        self.count_in_batch += 1;
        self.seen += 1;
    }

    /// Batch-means standard errors per component.
    pub fn standard_errors(mut self) -> Vec<T> {
        self.close_batch();
        let b = self.current + 1;
        if b < 2 {
            return vec![T::zero(); self.sum_of_means.len()];
        }
        let bt = T::from_count(b);
        self.sum_of_means
            .iter()
            .zip(&self.sum_sq_of_means)
            .map(|(&s, &ss)| {
                let var = ((ss - s * s / bt) / (bt - T::one())).max(T::zero());
                (var / bt).sqrt()
            })
            .collect()
    }
}

//! Monte Carlo estimates with an associative merge.
//!
//! All aggregation in this crate reduces per-path samples in a fixed order
//! (path index), so results do not depend on worker count. Merging operates
//! on `(sum, sum of squares, count)`, which is associative up to floating
//! point reassociation.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Sample mean with its standard error.
///
/// `seed` tags the experiment the samples came from; merging estimates with
/// different nonzero-count seeds is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
    pub seed: u64,
}

impl MonteCarloEstimate {
    pub fn zero(seed: u64) -> Self {
        Self { mean: 0.0, stderr: 0.0, n: 0, seed }
    }
}

/// Streaming `(sum, sum of squares, count)` accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningSum {
    sum: f64,
    sumsq: f64,
    n: u64,
}

impl RunningSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sample: f64) {
        self.sum += sample;
        self.sumsq += sample * sample;
        self.n += 1;
    }

    pub fn merge(&mut self, other: &RunningSum) {
        self.sum += other.sum;
        self.sumsq += other.sumsq;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }

    /// Standard error of the mean, `s / sqrt(n)` with the unbiased sample
    /// standard deviation `s`. Zero for fewer than two samples.
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let n = self.n as f64;
        let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }

    pub fn estimate(&self, seed: u64) -> MonteCarloEstimate {
        MonteCarloEstimate {
            mean: self.mean(),
            stderr: self.stderr(),
            n: self.n,
            seed,
        }
    }
}

fn to_sums(e: &MonteCarloEstimate) -> RunningSum {
    if e.n == 0 {
        return RunningSum::default();
    }
    let n = e.n as f64;
    let sum = e.mean * n;
    // stderr^2 = var / n, var = (sumsq - sum^2/n) / (n-1)
    let sumsq = e.stderr * e.stderr * n * (n - 1.0) + sum * sum / n;
    RunningSum { sum, sumsq, n: e.n }
}

/// Merge two estimates of the same quantity, as if computed from the
/// concatenated samples. Zero-count estimates act as the identity.
pub fn merge_estimates(
    a: &MonteCarloEstimate,
    b: &MonteCarloEstimate,
) -> Result<MonteCarloEstimate> {
    if a.n == 0 {
        return Ok(*b);
    }
    if b.n == 0 {
        return Ok(*a);
    }
    if a.seed != b.seed {
        return Err(CoreError::InvalidInput(format!(
            "cannot merge estimates from different experiments (seed {} vs {})",
            a.seed, b.seed
        )));
    }
    let mut s = to_sums(a);
    s.merge(&to_sums(b));
    Ok(s.estimate(a.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn estimate_of(samples: &[f64], seed: u64) -> MonteCarloEstimate {
        let mut s = RunningSum::new();
        for &x in samples {
            s.push(x);
        }
        s.estimate(seed)
    }

    #[test]
    fn merge_with_zero_count_is_identity() {
        let a = estimate_of(&[1.0, 2.0, 3.0], 9);
        let merged = merge_estimates(&a, &MonteCarloEstimate::zero(0)).unwrap();
        assert_eq!(a, merged);
    }

    #[test]
    fn merge_adds_counts() {
        let a = estimate_of(&[1.0, 2.0], 1);
        let b = estimate_of(&[3.0], 1);
        assert_eq!(merge_estimates(&a, &b).unwrap().n, 3);
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs = [0.3, -1.2, 2.5, 0.0, 4.4, -0.7, 1.1];
        let (left, right) = xs.split_at(3);
        let merged = merge_estimates(&estimate_of(left, 5), &estimate_of(right, 5)).unwrap();
        let direct = estimate_of(&xs, 5);
        assert_abs_diff_eq!(merged.mean, direct.mean, epsilon = 1e-12);
        assert_abs_diff_eq!(merged.stderr, direct.stderr, epsilon = 1e-12);
    }

    #[test]
    fn merge_associative_on_three_batches() {
        let a = estimate_of(&[0.1, 0.9, -0.4], 2);
        let b = estimate_of(&[2.0, -3.0], 2);
        let c = estimate_of(&[0.5, 0.5, 0.5, 7.0], 2);
        let ab_c = merge_estimates(&merge_estimates(&a, &b).unwrap(), &c).unwrap();
        let a_bc = merge_estimates(&a, &merge_estimates(&b, &c).unwrap()).unwrap();
        let direct = estimate_of(&[0.1, 0.9, -0.4, 2.0, -3.0, 0.5, 0.5, 0.5, 7.0], 2);
        for m in [ab_c, a_bc] {
            assert_abs_diff_eq!(m.mean, direct.mean, epsilon = 1e-12);
            assert_abs_diff_eq!(m.stderr, direct.stderr, epsilon = 1e-12);
            assert_eq!(m.n, direct.n);
        }
    }

    #[test]
    fn incompatible_seeds_rejected() {
        let a = estimate_of(&[1.0, 2.0], 1);
        let b = estimate_of(&[1.0, 2.0], 2);
        assert!(merge_estimates(&a, &b).is_err());
    }
}

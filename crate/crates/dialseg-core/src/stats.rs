//! Sample statistics and the seeded percentile bootstrap.

use alloc::vec::Vec;

use rand::Rng;
use thiserror::Error;

use crate::seeding;

pub fn mean(values: &[f64]) -> Option<f64> {
    let first = *values.first()?;
    // The mean of a constant list is that constant; summing would round.
    if values.iter().all(|v| *v == first) {
        return Some(first);
    }
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation (n − 1 denominator); `None` for fewer than 2 values.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some(libm::sqrt(ss / (values.len() - 1) as f64))
}

/// Percentile bootstrap interval for the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapCi {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BootstrapError {
    #[error("bootstrap needs at least 2 values, got {0}")]
    TooFewValues(usize),
    #[error("bootstrap needs at least 1000 iterations, got {0}")]
    TooFewIterations(usize),
    #[error("confidence level must be in (0, 1), got {0}")]
    InvalidLevel(f64),
}

/// Seeded percentile bootstrap of the sample mean.
///
/// Each iteration draws its generator from `(seed, iteration)` so the interval
/// is identical no matter how or where iterations run.
pub fn bootstrap_ci(
    values: &[f64],
    level: f64,
    iterations: usize,
    seed: u64,
) -> Result<BootstrapCi, BootstrapError> {
    if values.len() < 2 {
        return Err(BootstrapError::TooFewValues(values.len()));
    }
    if iterations < 1000 {
        return Err(BootstrapError::TooFewIterations(iterations));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(BootstrapError::InvalidLevel(level));
    }
    let n = values.len();
    let mut means = Vec::with_capacity(iterations);
    let mut resample = Vec::with_capacity(n);
    for iteration in 0..iterations {
        let mut rng = seeding::rng_for(seed, iteration as u64);
        resample.clear();
        resample.extend((0..n).map(|_| values[rng.random_range(0..n)]));
        means.push(mean(&resample).expect("n >= 2"));
    }
    means.sort_unstable_by(|a, b| a.total_cmp(b));
    let alpha = 1.0 - level;
    let lo_idx = ((alpha / 2.0) * iterations as f64) as usize;
    let hi_idx = (((1.0 - alpha / 2.0) * iterations as f64) as usize).min(iterations - 1);
    Ok(BootstrapCi {
        lo: means[lo_idx],
        hi: means[hi_idx],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use alloc::vec::Vec;

    #[test]
    fn mean_and_sd_basics() {
        assert_eq!(mean(&[4.0, 6.0]), Some(5.0));
        let sd = sample_sd(&[4.0, 6.0]).unwrap();
        assert!((sd - core::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(sample_sd(&[7.0]), None);
    }

    #[test]
    fn constant_values_collapse_interval() {
        let values = vec![0.4; 50];
        let ci = bootstrap_ci(&values, 0.95, 1000, 3).unwrap();
        assert_eq!(ci.lo, 0.4);
        assert_eq!(ci.hi, 0.4);
    }

    #[test]
    fn same_seed_same_interval() {
        let values: Vec<f64> = (0..40).map(|i| (i % 7) as f64 * 0.1).collect();
        let a = bootstrap_ci(&values, 0.95, 2000, 11).unwrap();
        let b = bootstrap_ci(&values, 0.95, 2000, 11).unwrap();
        assert_eq!(a, b);
        let c = bootstrap_ci(&values, 0.95, 2000, 12).unwrap();
        assert!(a != c);
    }

    #[test]
    fn undefined_below_two_values() {
        assert_eq!(
            bootstrap_ci(&[0.5], 0.95, 1000, 0),
            Err(BootstrapError::TooFewValues(1))
        );
    }

    #[test]
    fn iteration_floor_enforced() {
        assert_eq!(
            bootstrap_ci(&[0.5, 0.6], 0.95, 10, 0),
            Err(BootstrapError::TooFewIterations(10))
        );
    }
}

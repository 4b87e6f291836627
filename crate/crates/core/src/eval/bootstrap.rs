//! Paired bootstrap over per-unit metric pairs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BootstrapError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least one pair")]
    Empty,
    #[error("need at least one resample")]
    NoResamples,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    /// Mean of `b - a`.
    pub delta: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Two-sided: `min(1, 2·min(P*(d ≤ 0), P*(d ≥ 0)))` over resampled means.
    pub p: f64,
    pub n: usize,
    pub resamples: usize,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Percentile 95% CI of the mean paired difference, from `resamples`
/// resamples of the differences drawn with a ChaCha8 stream seeded by `seed`.
pub fn paired_bootstrap(a: &[f64], b: &[f64], resamples: usize, seed: u64) -> Result<BootstrapResult, BootstrapError> {
    if a.len() != b.len() {
        return Err(BootstrapError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(BootstrapError::Empty);
    }
    if resamples == 0 {
        return Err(BootstrapError::NoResamples);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let n = d.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| d[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let at = |q: f64| means[((q * resamples as f64).floor() as usize).min(resamples - 1)];
    let le = means.iter().filter(|m| **m <= 0.0).count() as f64 / resamples as f64;
    let ge = means.iter().filter(|m| **m >= 0.0).count() as f64 / resamples as f64;
    Ok(BootstrapResult {
        delta: mean(&d),
        ci_low: at(0.025),
        ci_high: at(0.975),
        p: (2.0 * le.min(ge)).min(1.0),
        n,
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples() {
        let a = [0.2, 0.5, 0.9, 1.0];
        let r = paired_bootstrap(&a, &a, 1000, 1).unwrap();
        assert_eq!((r.delta, r.ci_low, r.ci_high, r.p), (0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn constant_offset_excludes_zero() {
        let a: Vec<f64> = (0..20).map(|i| i as f64 / 40.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 0.1).collect();
        let r = paired_bootstrap(&a, &b, 10_000, 3).unwrap();
        assert!((r.delta - 0.1).abs() < 1e-12);
        assert!(r.ci_low > 0.0 && r.p < 0.05, "{r:?}");
    }

    #[test]
    fn errors() {
        assert_eq!(
            paired_bootstrap(&[1.0], &[], 10, 0),
            Err(BootstrapError::LengthMismatch(1, 0))
        );
        assert_eq!(paired_bootstrap(&[], &[], 10, 0), Err(BootstrapError::Empty));
    }

    #[test]
    fn seeded_and_reproducible() {
        let a = [0.1, 0.4, 0.35, 0.8, 0.0, 1.0];
        let b = [0.3, 0.4, 0.5, 0.7, 0.2, 1.0];
        assert_eq!(paired_bootstrap(&a, &b, 500, 9), paired_bootstrap(&a, &b, 500, 9));
    }
}

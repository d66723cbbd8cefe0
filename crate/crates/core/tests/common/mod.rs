//! Helpers shared by the statistical integration tests.
#![allow(dead_code)]

use nanoevo_core::stats::{mean, std_error};

/// Whether the replicate mean of `samples` lies within `k` standard errors
/// of `expected`.
///
/// When every replicate shows the same value the sample standard error is
/// zero; the comparison then falls back to a Poisson bound on the count
/// difference, `n · |expected − mean| ≤ −ln(α)`, at the two-sided 3σ level
/// α = 0.0027.
pub fn within_k_se(samples: &[f64], expected: f64, k: f64) -> bool {
    let m = mean(samples);
    let se = std_error(samples);
    if se > 0.0 {
        (m - expected).abs() <= k * se
    } else {
        samples.len() as f64 * (expected - m).abs() <= -(0.0027f64).ln()
    }
}

/// Kolmogorov–Smirnov statistic of `samples` against the CDF `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Critical KS distance at the 1% level for large `n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

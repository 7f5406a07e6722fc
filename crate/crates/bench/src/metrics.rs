//! Success and efficiency metrics.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("invalid arguments: {0}")]
    Validation(String),
}

/// pass^k: the probability that `k` trials drawn without replacement from
/// `n` trials with `s` successes all succeed, C(s,k)/C(n,k).
pub fn pass_hat_k(n: u64, s: u64, k: u64) -> Result<f64, MetricError> {
    if s > n {
        return Err(MetricError::Validation(format!("successes {s} exceed trials {n}")));
    }
    if k == 0 || k > n {
        return Err(MetricError::Validation(format!("k must be in 1..={n}, got {k}")));
    }
    if s < k {
        return Ok(0.0);
    }
    // C(s,k)/C(n,k) = prod_{i<k} (s-i)/(n-i)
    Ok((0..k).map(|i| (s - i) as f64 / (n - i) as f64).product())
}

/// Mean over domains, each domain weighted equally.
pub fn domain_weighted_average(scores: &[f64]) -> Result<f64, MetricError> {
    if scores.is_empty() {
        return Err(MetricError::Validation("no domain scores".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Relative reduction from `baseline` to `ours`, in percent.
pub fn reduction_percent(baseline: u64, ours: u64) -> Result<f64, MetricError> {
    if baseline == 0 {
        return Err(MetricError::Validation("baseline count is zero".into()));
    }
    Ok((baseline as f64 - ours as f64) / baseline as f64 * 100.0)
}

/// Round to one decimal, halves up. The value is first snapped to 1e-6 so
/// that binary noise such as 43.549999... rounds like the decimal 43.55.
pub fn round1(x: f64) -> f64 {
    let tenths = (x * 10.0 * 1e5).round() / 1e5;
    (tenths + 0.5).floor() / 10.0
}

/// Population variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64
}

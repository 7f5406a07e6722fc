//! Bounded retries for recoverable provider failures.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::config::RetryPolicy;
use crate::protocol::{ErrorClass, ErrorInfo};

/// One failed attempt, as logged in the telemetry record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryEntry {
    /// Request frame id of the op.
    pub op_id: u64,
    /// 1-based attempt number that failed.
    pub attempt: u32,
    pub class: ErrorClass,
}

#[derive(Debug, Clone)]
pub struct RetryOutcome<T> {
    pub result: Result<T, ErrorInfo>,
    pub attempts: u32,
    /// Every failed attempt, in order.
    pub failures: Vec<ErrorInfo>,
}

/// Delay between attempt `n` and `n + 1` (0-based): `base · 2ⁿ`, or zero
/// in deterministic mode.
pub fn backoff_delay(policy: &RetryPolicy, n: u32, deterministic: bool) -> Duration {
    if deterministic {
        return Duration::ZERO;
    }
    let factor = 1u64.checked_shl(n).unwrap_or(u64::MAX);
    Duration::from_millis(policy.backoff_base_ms.saturating_mul(factor))
}

/// Run `op` up to `max_retries + 1` times, retrying only transient errors.
/// `op` receives the 1-based attempt number; `sleep` performs the backoff.
pub fn with_retry<T>(
    policy: &RetryPolicy,
    deterministic: bool,
    mut sleep: impl FnMut(Duration),
    mut op: impl FnMut(u32) -> Result<T, ErrorInfo>,
) -> RetryOutcome<T> {
    let mut failures = Vec::new();
    let mut attempt = 0;
    loop {
        attempt += 1;
        match op(attempt) {
            Ok(value) => {
                return RetryOutcome {
                    result: Ok(value),
                    attempts: attempt,
                    failures,
                }
            }
            Err(error) => {
                failures.push(error.clone());
                if !error.retryable() || attempt > policy.max_retries {
                    return RetryOutcome {
                        result: Err(error),
                        attempts: attempt,
                        failures,
                    };
                }
                let delay = backoff_delay(policy, attempt - 1, deterministic);
                if !delay.is_zero() {
                    sleep(delay);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn policy(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            backoff_base_ms: 200,
        }
    }

    fn flaky(fail_first: u32) -> impl FnMut(u32) -> Result<&'static str, ErrorInfo> {
        move |attempt| {
            if attempt <= fail_first {
                Err(ErrorInfo::transient("provider timeout"))
            } else {
                Ok("done")
            }
        }
    }

    #[test]
    fn succeeds_on_third_attempt() {
        let out = with_retry(&policy(2), true, |_| {}, flaky(2));
        assert_eq!(out.result.unwrap(), "done");
        assert_eq!(out.attempts, 3);
        assert_eq!(out.failures.len(), 2);
    }

    #[test]
    fn fatal_is_never_retried() {
        let mut calls = 0;
        let out: RetryOutcome<()> = with_retry(&policy(2), true, |_| {}, |_| {
            calls += 1;
            Err(ErrorInfo::fatal("boom"))
        });
        assert_eq!(calls, 1);
        assert_eq!(out.attempts, 1);
        assert_eq!(out.result.unwrap_err().class, ErrorClass::Fatal);
    }

    #[test]
    fn zero_retries_surfaces_first_error() {
        let out = with_retry(&policy(0), true, |_| {}, flaky(1));
        assert_eq!(out.attempts, 1);
        assert!(out.result.unwrap_err().retryable());
    }

    #[test]
    fn backoff_doubles_and_is_zero_when_deterministic() {
        let p = policy(3);
        let mut slept = Vec::new();
        let _ = with_retry(&p, false, |d| slept.push(d), flaky(3));
        assert_eq!(
            slept,
            [200, 400, 800].map(Duration::from_millis).to_vec()
        );
        assert_eq!(backoff_delay(&p, 5, true), Duration::ZERO);
        assert_eq!(backoff_delay(&p, 64, false), Duration::from_millis(u64::MAX));
    }

    proptest! {
        #[test]
        fn attempts_never_exceed_bound(max_retries in 0u32..6, fail_first in 0u32..10, fatal_at in 0u32..10) {
            let mut calls = 0u32;
            let out = with_retry(&policy(max_retries), true, |_| {}, |attempt| {
                calls += 1;
                if attempt == fatal_at {
                    Err(ErrorInfo::fatal("x"))
                } else if attempt <= fail_first {
                    Err(ErrorInfo::transient("x"))
                } else {
                    Ok(())
                }
            });
            prop_assert!(out.attempts <= max_retries + 1);
            prop_assert_eq!(out.attempts, calls);
            prop_assert_eq!(out.failures.len() as u32, out.attempts - u32::from(out.result.is_ok()));
        }
    }
}

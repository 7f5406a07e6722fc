use agent_core::config::{QuotaSpec, RetryPolicy};
use agent_core::executor::{with_retry, ExecExit, TelemetryEvent};
use agent_core::protocol::{ErrorClass, ErrorInfo};
use agent_core::providers::{ScriptStep, ScriptedResponse};
use serde_json::json;

use crate::probe::Probe;
use crate::{ensure, Outcome};

fn llm_event(events: &[TelemetryEvent]) -> Result<&TelemetryEvent, String> {
    events.iter().find(|e| e.op == "llm.invoke").ok_or_else(|| "no llm.invoke event".to_string())
}

pub fn check() -> Outcome {
    let probe = Probe::new()?;
    let limits = QuotaSpec { wall_clock_seconds: 20.0, ..QuotaSpec::default() };
    let mut flaky = ScriptStep::respond(ScriptedResponse::text("APPROVE"));
    flaky.fail_first = 2;

    let outcome = probe.run(&probe.agent(json!({"workflow": "flaky"}), limits.clone(), 2), vec![flaky.clone()]);
    ensure!(outcome.is_ok(), "max_retries=2 ended with {:?}", outcome.record.exit);
    let llm = llm_event(&outcome.record.events)?;
    ensure!(llm.ok && llm.attempts == 3, "max_retries=2: ok={} attempts={}", llm.ok, llm.attempts);
    ensure!(outcome.record.retries.len() == 2, "max_retries=2 logged {} failures", outcome.record.retries.len());
    ensure!(
        outcome.record.retries.iter().all(|r| r.class == ErrorClass::Transient),
        "non-transient failure retried"
    );

    let outcome = probe.run(&probe.agent(json!({"workflow": "flaky"}), limits.clone(), 1), vec![flaky]);
    let llm = llm_event(&outcome.record.events)?;
    ensure!(!llm.ok && llm.attempts == 2, "max_retries=1: ok={} attempts={}", llm.ok, llm.attempts);
    ensure!(matches!(outcome.record.exit, ExecExit::Error { .. }), "max_retries=1 ended with {:?}", outcome.record.exit);

    // An exhausted mock script is a fatal provider error.
    let outcome = probe.run(&probe.agent(json!({"workflow": "flaky"}), limits, 5), Vec::new());
    let llm = llm_event(&outcome.record.events)?;
    ensure!(!llm.ok && llm.attempts == 1, "fatal provider error: ok={} attempts={}", llm.ok, llm.attempts);

    for max_retries in 0..6 {
        let policy = RetryPolicy { max_retries, backoff_base_ms: 10 };
        for fatal_at in 1..=max_retries + 1 {
            let mut calls = 0;
            let out = with_retry(&policy, true, |_| {}, |attempt| {
                calls += 1;
                if attempt == fatal_at {
                    Err::<(), _>(ErrorInfo::fatal("boom"))
                } else {
                    Err(ErrorInfo::transient("timeout"))
                }
            });
            ensure!(calls == fatal_at, "fatal at attempt {fatal_at} with max_retries={max_retries}: {calls} calls");
            ensure!(out.attempts == fatal_at, "attempt count {} for fatal at {fatal_at}", out.attempts);
        }
    }
    Ok("fail_first=2: 3 attempts with max_retries=2, 2 attempts and failure with max_retries=1; fatal errors stop after 1 attempt".into())
}

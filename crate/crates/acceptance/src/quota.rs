use std::time::{Duration, Instant};

use agent_core::config::{QuotaDimension, QuotaSpec};
use agent_core::executor::ExecExit;
use serde_json::json;

use crate::probe::{processes_mentioning, Probe};
use crate::{ensure, Outcome};

const WALL_CLOCK_LIMIT: f64 = 2.0;
const MEMORY_LIMIT: u64 = 64 * 1024 * 1024;
const GRACE: Duration = Duration::from_secs(2);

pub fn check() -> Outcome {
    let probe = Probe::new()?;
    let spin = probe.agent(
        json!({"workflow": "spin"}),
        QuotaSpec { wall_clock_seconds: WALL_CLOCK_LIMIT, ..QuotaSpec::default() },
        0,
    );
    let start = Instant::now();
    let outcome = probe.run(&spin, Vec::new());
    let elapsed = start.elapsed();
    ensure!(
        outcome.record.exit == ExecExit::QuotaKilled { dimension: QuotaDimension::WallClock },
        "spin ended with {:?}",
        outcome.record.exit
    );
    let limit = Duration::from_secs_f64(WALL_CLOCK_LIMIT);
    ensure!(elapsed >= limit && elapsed <= limit + GRACE, "spin killed after {elapsed:?}, limit {limit:?}");
    std::thread::sleep(GRACE);
    let survivors = processes_mentioning(&probe.blueprint_dir());
    ensure!(survivors.is_empty(), "processes left after the spin kill: {survivors:?}");

    let balloon = probe.agent(
        json!({"workflow": "balloon"}),
        QuotaSpec { memory_bytes: MEMORY_LIMIT, wall_clock_seconds: 30.0, ..QuotaSpec::default() },
        0,
    );
    let outcome = probe.run(&balloon, Vec::new());
    ensure!(
        outcome.record.exit == ExecExit::QuotaKilled { dimension: QuotaDimension::Memory },
        "balloon ended with {:?}",
        outcome.record.exit
    );
    let peak = outcome.record.quota_usage.memory_bytes;
    std::thread::sleep(GRACE);
    let survivors = processes_mentioning(&probe.blueprint_dir());
    ensure!(survivors.is_empty(), "processes left after the balloon kill: {survivors:?}");

    Ok(format!(
        "spin killed on wall_clock after {:.2}s (limit {WALL_CLOCK_LIMIT}s); balloon killed on memory at {} MiB (limit {} MiB); no survivors after {}s",
        elapsed.as_secs_f64(),
        peak / (1024 * 1024),
        MEMORY_LIMIT / (1024 * 1024),
        GRACE.as_secs()
    ))
}

//! Runs trial batches with bounded concurrency.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::task::Task;
use crate::trial::{TrialEnv, TrialResult};
use crate::variant::{AgentSetup, Variant};
use crate::BenchError;

pub const DEFAULT_CONCURRENCY: usize = 2;

#[derive(Debug, Clone, Copy)]
pub struct Job<'a> {
    pub task: &'a Task,
    pub setup: AgentSetup,
    pub trial: u32,
}

/// Every (setup, task, trial) combination, setups outermost.
pub fn jobs<'a>(tasks: &'a [Task], setups: &[AgentSetup], trials: u32) -> Vec<Job<'a>> {
    let mut out = Vec::new();
    for &setup in setups {
        for task in tasks {
            for trial in 0..trials {
                out.push(Job { task, setup, trial });
            }
        }
    }
    out
}

/// Run `jobs` on up to `concurrency` worker threads. Results come back in
/// job order whatever order the trials finished in.
pub fn run_jobs(env: &TrialEnv, jobs: &[Job<'_>], concurrency: usize) -> Vec<TrialResult> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<TrialResult>>> = Mutex::new(vec![None; jobs.len()]);
    let workers = concurrency.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let result = env.run_trial(job.task, job.setup, job.trial);
                slots.lock().expect("result slots")[i] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Toggles of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridToggle {
    /// Source code agent: the blueprint instead of the FC baseline.
    Sca,
    Dc,
    Rt,
}

pub fn parse_grid(spec: &str) -> Result<Vec<GridToggle>, BenchError> {
    let mut grid = Vec::new();
    for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let toggle = match name {
            "sca" => GridToggle::Sca,
            "dc" => GridToggle::Dc,
            "rt" => GridToggle::Rt,
            other => return Err(BenchError::Usage(format!("unknown grid toggle `{other}` (expected sca, dc, rt)"))),
        };
        if !grid.contains(&toggle) {
            grid.push(toggle);
        }
    }
    Ok(grid)
}

/// Agent setups of the ablation grid, in table order. Toggles left out of
/// the grid stay on. With `sca` in the grid the first row is the FC
/// baseline, which has neither gate nor consolidated tools.
pub fn ablation_setups(grid: &[GridToggle]) -> Vec<AgentSetup> {
    let mut rows = Vec::new();
    if grid.contains(&GridToggle::Sca) {
        rows.push(AgentSetup::baseline(Variant::Fc));
    }
    let dc_values: &[bool] = if grid.contains(&GridToggle::Dc) { &[false, true] } else { &[true] };
    let rt_values: &[bool] = if grid.contains(&GridToggle::Rt) { &[false, true] } else { &[true] };
    for &rt in rt_values {
        for &dc in dc_values {
            rows.push(AgentSetup::blueprint(dc, rt));
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_has_five_rows_in_table_order() {
        let rows = ablation_setups(&parse_grid("sca,dc,rt").unwrap());
        let labels: Vec<String> = rows.iter().map(AgentSetup::label).collect();
        assert_eq!(
            labels,
            ["fc", "blueprint[]", "blueprint[dc]", "blueprint[rt]", "blueprint[dc,rt]"]
        );
        assert!(parse_grid("sca,xx").is_err());
        assert_eq!(ablation_setups(&parse_grid("dc").unwrap()).len(), 2);
    }

    #[test]
    fn empty_task_set_runs_nothing() {
        assert!(jobs(&[], &ablation_setups(&[GridToggle::Dc]), 3).is_empty());
    }
}

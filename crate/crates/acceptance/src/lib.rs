//! Acceptance suite for the engine, the benchmark harness and the control
//! layer. Each criterion runs on its own and reports one line.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

mod ablation;
mod bench_env;
mod consolidation;
mod determinism;
mod metrics;
mod probe;
mod protocol;
mod quota;
mod retrieval;
mod retry;
mod sse;

/// Hidden subcommand that runs `agentctl` inside this binary, so the suite
/// can drive the real command line in a child process.
pub const AGENTCTL_SUBCOMMAND: &str = "__agentctl";

pub type Outcome = Result<String, String>;

pub struct Criterion {
    pub name: &'static str,
    pub check: fn() -> Outcome,
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}
pub(crate) use ensure;

pub fn criteria() -> Vec<Criterion> {
    vec![
        Criterion { name: "determinism", check: determinism::check },
        Criterion { name: "metric-math", check: metrics::check },
        Criterion { name: "tool-consolidation", check: consolidation::check },
        Criterion { name: "double-check-ablation", check: ablation::check },
        Criterion { name: "quota-enforcement", check: quota::check },
        Criterion { name: "retry-semantics", check: retry::check },
        Criterion { name: "protocol-robustness", check: protocol::check },
        Criterion { name: "sse-conformance", check: sse::check },
        Criterion { name: "retrieval-oracle", check: retrieval::check },
    ]
}

/// Run the criteria named in `filter` (all when empty). Exit code 0 when
/// every selected criterion passes, 1 otherwise, 2 for an unknown name.
pub fn run(filter: &[String]) -> i32 {
    let all = criteria();
    if let Some(unknown) = filter.iter().find(|f| !all.iter().any(|c| c.name == f.as_str())) {
        let names: Vec<&str> = all.iter().map(|c| c.name).collect();
        eprintln!("unknown criterion `{unknown}`; expected one of {}", names.join(", "));
        return 2;
    }
    let mut failed = 0;
    for criterion in all.iter().filter(|c| filter.is_empty() || filter.iter().any(|f| f == c.name)) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(criterion.check)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {message}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} ({secs:.1}s): {detail}", criterion.name),
            Err(reason) => {
                failed += 1;
                println!("FAIL {} ({secs:.1}s): {reason}", criterion.name);
            }
        }
    }
    i32::from(failed > 0)
}

//! The `agentctl` command line.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use agent_blueprints::workflows::assistant::STOP_TOKEN;
use agent_core::config::AgentConfig;
use agent_core::executor::{TelemetryLog, TelemetryRecord};
use agent_core::runtime::deterministic_from_env;
use agent_core::sandbox::RuntimeDef;
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::domains::Domain;
use crate::fixtures::Fixtures;
use crate::harness::{ablation_setups, jobs, parse_grid, run_jobs, DEFAULT_CONCURRENCY};
use crate::replay::{domain_of, replay_tool_calls};
use crate::report::build_report;
use crate::sse::SseReader;
use crate::task::Task;
use crate::trial::TrialResult;
use crate::variant::{AgentSetup, Variant};
use crate::{open_env, self_interpreter, BenchError, INTERPRET_SUBCOMMAND};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_HARNESS: i32 = 2;

pub const DEFAULT_SERVER: &str = "http://127.0.0.1:7700";

#[derive(Debug, Parser)]
#[command(name = "agentctl", about = "Agent registration, chat, benchmarks and trace replay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate an agent config and add it to a registry directory.
    Register {
        config: PathBuf,
        #[arg(long, default_value = "agents")]
        registry: PathBuf,
    },
    /// Line-mode chat with an agent served by agentd.
    Chat {
        agent_id: String,
        #[arg(long, default_value = DEFAULT_SERVER)]
        server: String,
        #[arg(long, default_value = "cli-user")]
        user: String,
        #[arg(long, env = "AGENT_TOKEN")]
        token: String,
    },
    /// Benchmark runs.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
    /// Re-run the tool calls of a recorded execution on a fresh state.
    Replay {
        exec_id: String,
        #[arg(long, default_value = "bench-out")]
        data_dir: PathBuf,
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    #[command(name = INTERPRET_SUBCOMMAND, hide = true)]
    Interpret {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<String>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// retail, airline or all.
    #[arg(long, default_value = "all")]
    domain: String,
    #[arg(long, default_value_t = 1)]
    trials: u32,
    #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
    concurrency: usize,
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
    #[arg(long)]
    fixtures: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    Run {
        #[command(flatten)]
        common: Common,
        /// blueprint, fc, react or act.
        #[arg(long, default_value = "blueprint")]
        variant: String,
        /// Reference variant for per-task deltas and case studies, or `none`.
        #[arg(long, default_value = "fc")]
        baseline: String,
    },
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "sca,dc,rt")]
        grid: String,
    },
}

/// Run `agentctl` with `args` (without the program name); returns the
/// process exit code.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let args: Vec<String> = std::iter::once("agentctl".to_string()).chain(args).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_HARNESS } else { EXIT_OK };
        }
    };
    if let Command::Interpret { args } = cli.command {
        return agent_blueprints::interpreter_main(args);
    }
    match dispatch(cli.command, self_interpreter) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("agentctl: {e}");
            EXIT_HARNESS
        }
    }
}

fn dispatch(command: Command, interpreter: fn() -> Result<RuntimeDef, BenchError>) -> Result<i32, BenchError> {
    match command {
        Command::Register { config, registry } => register(&config, &registry),
        Command::Chat { agent_id, server, user, token } => chat(&server, &agent_id, &user, &token),
        Command::Bench { command } => {
            let interpreter = interpreter()?;
            match command {
                BenchCommand::Run { common, variant, baseline } => {
                    let variant = Variant::parse(&variant)
                        .ok_or_else(|| BenchError::Usage(format!("unknown variant `{variant}`")))?;
                    let subject = if variant.is_baseline() {
                        AgentSetup::baseline(variant)
                    } else {
                        AgentSetup::blueprint(true, true)
                    };
                    let reference = match baseline.as_str() {
                        "none" => None,
                        name => match Variant::parse(name) {
                            Some(v) if v.is_baseline() => Some(AgentSetup::baseline(v)),
                            _ => return Err(BenchError::Usage(format!("unknown baseline `{name}`"))),
                        },
                    }
                    .filter(|r| *r != subject);
                    let mut setups = vec![subject];
                    setups.extend(reference);
                    bench(&common, &setups, reference, &[subject], "Benchmark report", interpreter)
                }
                BenchCommand::Ablate { common, grid } => {
                    let setups = ablation_setups(&parse_grid(&grid)?);
                    let Some(last) = setups.last().copied() else {
                        return Err(BenchError::Usage("empty ablation grid".into()));
                    };
                    // The full configuration is listed first so deltas compare it to the baseline row.
                    let mut ordered = vec![last];
                    ordered.extend(setups.iter().copied().filter(|s| *s != last));
                    let reference = setups.first().copied().filter(|s| s.variant.is_baseline());
                    bench(&common, &ordered, reference, &[], "Ablation report", interpreter)
                }
            }
        }
        Command::Replay { exec_id, data_dir, fixtures } => {
            replay(&exec_id, &data_dir, &fixtures.map(Fixtures::new).unwrap_or_default())
        }
        Command::Interpret { .. } => unreachable!("handled before dispatch"),
    }
}

fn select_tasks(fixtures: &Fixtures, domain: &str) -> Result<Vec<Task>, BenchError> {
    match domain {
        "all" => fixtures.all_tasks(),
        name => match Domain::parse(name) {
            Some(d) if Domain::BENCHMARKED.contains(&d) => fixtures.tasks(d),
            _ => Err(BenchError::Usage(format!("unknown domain `{name}` (expected retail, airline or all)"))),
        },
    }
}

/// Run the setups, write results and the report, print a summary. Trial
/// failures of `gating` setups (all setups when empty) give exit code 1.
fn bench(
    common: &Common,
    setups: &[AgentSetup],
    reference: Option<AgentSetup>,
    gating: &[AgentSetup],
    title: &str,
    interpreter: RuntimeDef,
) -> Result<i32, BenchError> {
    if common.trials == 0 {
        return Err(BenchError::Usage("--trials must be at least 1".into()));
    }
    let fixtures = common.fixtures.clone().map(Fixtures::new).unwrap_or_default();
    let tasks = select_tasks(&fixtures, &common.domain)?;
    let env = open_env(&fixtures, &common.out, interpreter, deterministic_from_env())?;
    let results = run_jobs(&env, &jobs(&tasks, setups, common.trials), common.concurrency);
    write_results(&common.out.join("results.jsonl"), &results)?;
    let report = build_report(title, &tasks, setups, reference, common.trials, &results)?;
    report.write(&common.out)?;

    for scores in &report.scores {
        let domains: Vec<String> = scores.domains.iter().map(|d| format!("{} {:.1}", d.domain, d.pass_hat_k[0])).collect();
        println!("{:<18} pass^1 {} avg {:.1}", scores.label, domains.join(" "), scores.average);
    }
    let gated = |r: &&TrialResult| gating.is_empty() || gating.contains(&r.setup);
    let failures: Vec<&TrialResult> = results.iter().filter(gated).filter(|r| !r.success).collect();
    for f in &failures {
        println!(
            "FAIL {} {} trial {}: {}",
            f.setup.label(),
            f.task_id,
            f.trial,
            f.diagnostic.as_deref().unwrap_or("unknown")
        );
    }
    println!("report written to {}", common.out.join("report.md").display());
    Ok(if failures.is_empty() { EXIT_OK } else { EXIT_FAILURES })
}

fn write_results(path: &Path, results: &[TrialResult]) -> Result<(), BenchError> {
    let mut text = String::new();
    for r in results {
        text.push_str(&serde_json::to_string(r).expect("trial result serializes"));
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

pub fn register(config: &Path, registry: &Path) -> Result<i32, BenchError> {
    let agent = AgentConfig::load(config)?;
    agent.validate(&[agent_blueprints::RUNTIME_TAG])?;
    std::fs::create_dir_all(registry)?;
    let text = toml::to_string(&agent).map_err(|e| BenchError::Usage(e.to_string()))?;
    let target = registry.join(format!("{}.toml", agent.agent_id));
    std::fs::write(&target, text)?;
    println!("registered {} at {}", agent.agent_id, target.display());
    Ok(EXIT_OK)
}

pub fn replay(exec_id: &str, data_dir: &Path, fixtures: &Fixtures) -> Result<i32, BenchError> {
    let log = TelemetryLog::new(data_dir.join("telemetry.log"));
    let line = log
        .lookup(exec_id)?
        .ok_or_else(|| BenchError::Usage(format!("execution {exec_id} not found in {}", log.path().display())))?;
    let record: TelemetryRecord = serde_json::from_str(&line).map_err(|e| BenchError::fixture(log.path(), e))?;
    let domain = domain_of(&record)
        .ok_or_else(|| BenchError::Usage(format!("cannot tell the domain of agent `{}`", record.agent_id)))?;
    let result = replay_tool_calls(domain, fixtures.state(domain)?, &record);
    println!("execution {exec_id} ({domain}): replayed {} tool calls", result.calls);
    println!("state hash {}", result.state_hash);
    let task_id = record.session_id.split('.').next().unwrap_or_default();
    let task = fixtures.tasks(domain)?.into_iter().find(|t| t.task_id == task_id);
    match task {
        Some(task) if task.expected.state_hash == result.state_hash => {
            println!("matches the expected state of {task_id}");
            Ok(EXIT_OK)
        }
        Some(_) => {
            println!("differs from the expected state of {task_id}");
            Ok(EXIT_FAILURES)
        }
        None => Ok(EXIT_OK),
    }
}

fn http_error(e: ureq::Error) -> BenchError {
    BenchError::Server(e.to_string())
}

/// Create a session, then relay stdin lines as messages and print the
/// assistant's replies until the session ends or stdin closes.
pub fn chat(server: &str, agent_id: &str, user: &str, token: &str) -> Result<i32, BenchError> {
    let server = server.trim_end_matches('/');
    let created: Value = ureq::post(&format!("{server}/v1/sessions"))
        .header("X-Agent-Token", token)
        .send_json(json!({"user_id": user, "agent_id": agent_id}))
        .map_err(http_error)?
        .body_mut()
        .read_json()
        .map_err(http_error)?;
    let session_id = created["session_id"]
        .as_str()
        .ok_or_else(|| BenchError::Server(format!("unexpected reply {created}")))?
        .to_string();
    eprintln!("session {session_id}");
    let stdin = std::io::stdin();
    let mut started = false;
    loop {
        print!("> ");
        std::io::stdout().flush()?;
        let mut line = String::new();
        if stdin.lock().read_line(&mut line)? == 0 {
            // End of input closes a running conversation.
            if started {
                post_and_print(server, &session_id, token, STOP_TOKEN)?;
            }
            return Ok(EXIT_OK);
        }
        let content = line.trim_end_matches(['\n', '\r']);
        if content.is_empty() {
            continue;
        }
        started = true;
        if post_and_print(server, &session_id, token, content)? {
            return Ok(EXIT_OK);
        }
    }
}

/// Post one message and print its stream. True once the session ended.
fn post_and_print(server: &str, session_id: &str, token: &str, content: &str) -> Result<bool, BenchError> {
    let response = ureq::post(&format!("{server}/v1/sessions/{session_id}/messages"))
        .header("X-Agent-Token", token)
        .send_json(json!({"content": content}))
        .map_err(http_error)?;
    let reader = BufReader::new(response.into_body().into_reader());
    let mut finished = false;
    for event in SseReader::new(reader) {
        let event = event.map_err(BenchError::Server)?;
        let data: Value = serde_json::from_str(&event.data).unwrap_or(Value::Null);
        match event.event.as_str() {
            "assistant.message" => println!("{}", data["content"].as_str().unwrap_or_default()),
            "tool.call" => eprintln!("  [tool] {}({})", data["name"].as_str().unwrap_or("?"), data["args"]),
            "error" => eprintln!("  [error] {}", data),
            "done" => finished = true,
            "status" if matches!(data["status"].as_str(), Some("finished" | "failed")) => finished = true,
            _ => {}
        }
    }
    Ok(finished)
}

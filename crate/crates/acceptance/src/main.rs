use agent_acceptance::{run, AGENTCTL_SUBCOMMAND};
use agent_bench::INTERPRET_SUBCOMMAND;

fn main() {
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let code = match args.first().map(String::as_str) {
        Some(INTERPRET_SUBCOMMAND) => agent_blueprints::interpreter_main(args.drain(1..)),
        Some(AGENTCTL_SUBCOMMAND) => agent_bench::cli::run(args.drain(1..)),
        _ => run(&args),
    };
    std::process::exit(code);
}

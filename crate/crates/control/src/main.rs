use std::path::PathBuf;
use std::sync::Arc;

use agent_bench::{self_interpreter, INTERPRET_SUBCOMMAND};
use agent_control::daemon::{build_gateway, DaemonConfig};
use clap::Parser;

#[derive(Debug, Parser)]
#[command(name = "agentd", about = "Agent gateway: sessions, executions and SSE streaming")]
struct Args {
    #[arg(long, default_value = "agentd.toml")]
    config: PathBuf,
    /// Overrides the configured listen address.
    #[arg(long)]
    listen: Option<std::net::SocketAddr>,
}

fn main() {
    let mut argv = std::env::args();
    if argv.nth(1).as_deref() == Some(INTERPRET_SUBCOMMAND) {
        std::process::exit(agent_blueprints::interpreter_main(argv));
    }
    tracing_subscriber::fmt().with_env_filter(tracing_subscriber::EnvFilter::from_default_env()).init();
    let args = Args::parse();
    std::process::exit(match run(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("agentd: {e}");
            2
        }
    });
}

fn run(args: Args) -> Result<(), String> {
    let mut config = DaemonConfig::load(&args.config)?;
    if let Some(listen) = args.listen {
        config.listen = listen;
    }
    let interpreter = self_interpreter().map_err(|e| e.to_string())?;
    let gateway = Arc::new(build_gateway(&config, interpreter)?);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(config.listen).await.map_err(|e| e.to_string())?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        println!("agentd listening on http://{addr}");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        agent_control::server::serve(listener, gateway, shutdown).await.map_err(|e| e.to_string())
    })
}

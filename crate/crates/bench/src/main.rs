fn main() {
    std::process::exit(agent_bench::cli::run(std::env::args().skip(1)));
}

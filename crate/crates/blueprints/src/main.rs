fn main() {
    std::process::exit(agent_blueprints::interpreter_main(std::env::args().skip(1)));
}

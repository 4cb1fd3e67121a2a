fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DIAGRAPH_LOG", "warn")).init();
    std::process::exit(diagraph_cli::run(std::env::args()));
}

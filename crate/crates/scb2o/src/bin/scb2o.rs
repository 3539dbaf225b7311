fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter_or(scb2o::cli::LOG_ENV, "warn"),
    )
    .init();
    std::process::exit(scb2o::cli::main_with_args(std::env::args()));
}

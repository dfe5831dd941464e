fn main() -> std::process::ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    std::process::ExitCode::from(turnpilot::cli::run(std::env::args_os()))
}

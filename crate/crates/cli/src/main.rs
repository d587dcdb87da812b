use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DYNASCORE_LOG", "warn")).init();
    ExitCode::from(dynascore_cli::run(std::env::args_os()))
}
